//! A small budget sweep written to a temporary directory, as the `sweep`
//! subcommand does.
//!
//! cargo run --release --example sweep

use amtrl::harness::{cmd_sweep, SweepConfig};

fn main() -> amtrl::Result<()> {
    let config: SweepConfig = serde_json::from_str(
        r#"{
            "instance": {"kind": "almost_sparse", "d": 10, "k": 3, "T": 20, "sigma_z": 0.5, "seed": 0},
            "strategies": ["known_l1", "l1", "passive"],
            "budgets": [1000, 2000, 4000, 8000],
            "seeds": 8,
            "n_floor": 20,
            "n_target": 2000
        }"#,
    )?;
    let out = std::env::temp_dir().join("amtrl-sweep-example");
    let outcome = cmd_sweep(&config, &out)?;
    for row in &outcome.summary {
        println!("{:<9} N_tot {:>5}: median ER {:.2e}, IQR {:.1e}", row.strategy.as_str(), row.n_tot, row.median_er.unwrap_or(f64::NAN), row.iqr().unwrap_or(f64::NAN));
    }
    for (s, slope) in &outcome.slopes {
        println!("{} log-log slope {slope:.2}", s.as_str());
    }
    println!("files in {}", out.display());
    Ok(())
}
