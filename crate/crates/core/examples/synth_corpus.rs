//! Writes a synthetic corpus: `synth_corpus <dir> <authentic> <spliced> [seed]`.

use std::path::PathBuf;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 {
        eprintln!("usage: synth_corpus <dir> <authentic> <spliced> [seed]");
        std::process::exit(1);
    }
    let n = |s: &str| s.parse::<usize>().expect("count must be an integer");
    let seed = args.get(3).map_or(0, |s| s.parse().expect("seed must be an integer"));
    if let Err(e) = splicefuse::synth::write_synthetic_corpus(&PathBuf::from(&args[0]), n(&args[1]), n(&args[2]), seed)
    {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
