//! Parsing a run configuration, the format read by the `mpqkd` binary.

use mpqkd::config::RunConfig;

const TEXT: &str = "\
# reference setting at 1e12 rounds
N = 1e12
l = 1e5
variant = six-state
start_km = 100
stop_km = 300
step_km = 50
optimize = true
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg: RunConfig = TEXT.parse()?;
    println!("{cfg}");
    println!("grid: {:?}", cfg.sweep.map(|g| g.distances()));

    for bad in ["l = 10\n", "N = 1e10\nl = 10\nmu = 0.4\nmu = 0.5\n", "N = 1e10\nl = 10\nstart_km = 1\n"] {
        match bad.parse::<RunConfig>() {
            Ok(_) => println!("accepted"),
            Err(e) => println!("rejected: {e}"),
        }
    }
    Ok(())
}
