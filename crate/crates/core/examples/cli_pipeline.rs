//! Drives `odlab` in-process on the bundled configs, writing into a temporary directory.
//!
//! Equivalent shell usage:
//! `ODLAB_OUT_DIR=out odlab --config crates/core/examples/configs/poisson_disk.json solve`

use std::path::Path;

use orlicz_dirichlet::cli::main_with_args;

fn main() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let out = std::env::temp_dir().join("odlab-example");
    let runs = [
        ("poisson_disk.json", "solve"),
        ("finite_diverges.json", "counterexample"),
        ("grushin_disk.json", "degiorgi"),
        ("grushin_disk.json", "subunit"),
    ];
    for (cfg, sub) in runs {
        let args = [
            "odlab".to_string(),
            "--config".into(),
            configs.join(cfg).to_string_lossy().into_owned(),
            "--out".into(),
            out.to_string_lossy().into_owned(),
            sub.into(),
        ];
        let code = main_with_args(args);
        println!("{sub} with {cfg}: exit {code}");
    }
    let mut files: Vec<_> =
        std::fs::read_dir(&out).into_iter().flatten().flatten().map(|e| e.file_name().to_string_lossy().into_owned()).collect();
    files.sort();
    println!("wrote to {}: {}", out.display(), files.join(", "));
}
