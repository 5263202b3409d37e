//! Drive the command-line front end from code with one of the sample configs.

fn main() {
    let config = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/configs/timing_2pi.toml"
    );
    for args in [
        vec!["ctecs", "--config", config, "feasibility"],
        vec!["ctecs", "--config", config, "generate", "--emit", "csv"],
    ] {
        let code = ctecs::cli::run(args);
        println!("exit code {code}\n");
    }
}
