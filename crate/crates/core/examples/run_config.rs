//! Drive the command-line layer from code: write a TOML config with unit
//! strings, run the `zz` subcommand into a directory, and re-run it from the
//! manifest it wrote.
//!
//! Run with `cargo run --release --example run_config`.

use transmon_parity::cli::main_with_args;

const CONFIG: &str = r#"
seed = 1

[circuit]
omega_q2_ghz = "4800 MHz"
alpha_q2_mhz = -270.0

[sweep]
omega_c_min_ghz = 5.6
omega_c_max_ghz = "7.0 GHz"
points = 15
"#;

fn main() -> std::io::Result<()> {
    let dir = std::env::temp_dir().join("transmon-parity-example");
    std::fs::create_dir_all(&dir)?;
    let config = dir.join("zz.toml");
    std::fs::write(&config, CONFIG)?;
    let first = dir.join("first");
    let second = dir.join("second");

    let code = main_with_args(["transmon-parity", "zz", "--config", config.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    println!("first run exited with {code}");
    let manifest = first.join("manifest.json");
    let code = main_with_args(["transmon-parity", "zz", "--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    println!("re-run from manifest exited with {code}");

    let a = std::fs::read(first.join("zz.csv"))?;
    let b = std::fs::read(second.join("zz.csv"))?;
    println!("outputs identical: {}", a == b);
    print!("{}", String::from_utf8_lossy(&a));
    Ok(())
}
