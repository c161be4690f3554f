use ciss::formats::read_jsonl;
use ciss::model::{default_edges, fit_model, save_model, PairSample, PatchRecord};

use crate::config::RunConfig;
use crate::error::CliResult;

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let pairs: Vec<PairSample> = read_jsonl(RunConfig::require(&cfg.pairs, "pairs")?)?;
    for p in &pairs {
        p.validate()?;
    }
    let patches: Vec<PatchRecord> = read_jsonl(RunConfig::require(&cfg.patches, "patches")?)?;
    let out = RunConfig::require(&cfg.model, "model")?;
    let edges = cfg.bin_edges.clone().unwrap_or_else(default_edges);
    let report = fit_model(&pairs, &patches, &edges, cfg.min_count, cfg.distance)?;
    save_model(&report.model, out)?;

    let m = &report.model;
    println!("lo,hi,count,valid,cov_ss,fit_ss,resid_ss,cov_ls,fit_ls,resid_ls");
    for b in &report.bins.bins {
        let d = b.midpoint();
        let (fs, fl) = (m.gamma_ss(d), m.gamma_ls(d));
        println!(
            "{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            b.lo,
            b.hi,
            b.count,
            u8::from(b.valid),
            b.cov_ss,
            fs,
            b.cov_ss - fs,
            b.cov_ls,
            fl,
            b.cov_ls - fl
        );
    }
    for (name, f) in [("gamma_ss", &report.fit.ss), ("gamma_ls", &report.fit.ls)] {
        println!(
            "{name}: a={} b={} weighted_residual={:.9e}{}",
            f.curve.a,
            f.curve.b,
            f.residual,
            if f.degenerate { " (degenerate)" } else { "" }
        );
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}
