//! Solver settings from a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::de::DeserializeOwned;
use sweptgrid::{EngineKind, Mode, PoolSpec, ProblemKind, SolverConfig, TransportConfig};

/// Reads a JSON document; absent fields take their defaults.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Link and pool flags shared by every subcommand that runs solves.
#[derive(Debug, Clone, Default, Args)]
pub struct LinkArgs {
    /// Transport mode: virtual or wall.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Seconds per message.
    #[arg(long)]
    pub latency: Option<f64>,
    /// Bytes per second.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Fast pool as workers:cost.
    #[arg(long = "pool-a")]
    pub pool_a: Option<PoolSpec>,
    /// Slow pool as workers:cost.
    #[arg(long = "pool-b")]
    pub pool_b: Option<PoolSpec>,
    /// Modeled seconds per cell per sub-step.
    #[arg(long = "cell-seconds")]
    pub cell_seconds: Option<f64>,
}

impl LinkArgs {
    pub fn apply_transport(&self, t: &mut TransportConfig) {
        if let Some(m) = self.mode {
            t.mode = m;
        }
        if let Some(l) = self.latency {
            t.latency = l;
        }
        if let Some(b) = self.bandwidth {
            t.bandwidth = b;
        }
    }

    pub fn apply_pools(&self, a: &mut PoolSpec, b: &mut PoolSpec, cell: &mut Option<f64>) {
        if let Some(p) = self.pool_a {
            *a = p;
        }
        if let Some(p) = self.pool_b {
            *b = p;
        }
        if self.cell_seconds.is_some() {
            *cell = self.cell_seconds;
        }
    }
}

/// Flags of a single solve.
#[derive(Debug, Clone, Default, Args)]
pub struct SolveArgs {
    /// JSON solver configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<ProblemKind>,
    #[arg(long)]
    pub engine: Option<EngineKind>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long)]
    pub share: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub ranks: Option<usize>,
    #[command(flatten)]
    pub link: LinkArgs,
    /// Snapshot file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SolveArgs {
    pub fn resolve(&self) -> anyhow::Result<SolverConfig> {
        let mut c: SolverConfig = match &self.config {
            Some(p) => read_json(p)?,
            None => SolverConfig::default(),
        };
        if let Some(v) = self.problem {
            c.problem = v;
        }
        if let Some(v) = self.engine {
            c.engine = v;
        }
        if let Some(v) = self.nx {
            c.nx = v;
        }
        if let Some(v) = self.block {
            c.block = v;
        }
        if let Some(v) = self.share {
            c.share = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(v) = self.ranks {
            c.ranks = v;
        }
        self.link.apply_transport(&mut c.transport);
        self.link.apply_pools(&mut c.pool_a, &mut c.pool_b, &mut c.cell_seconds);
        if self.out.is_some() {
            c.snapshot = self.out.clone();
        }
        c.validate().map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"problem": "euler", "nx": 96, "block": 8, "steps": 3}"#).unwrap();
        let args = SolveArgs {
            config: Some(p),
            block: Some(16),
            link: LinkArgs {
                latency: Some(0.5),
                ..Default::default()
            },
            ..Default::default()
        };
        let c = args.resolve().unwrap();
        assert_eq!(c.problem, ProblemKind::Euler);
        assert_eq!((c.nx, c.block, c.steps), (96, 16, 3));
        assert_eq!(c.transport.latency, 0.5);
    }

    #[test]
    fn invalid_grid_is_reported() {
        let args = SolveArgs {
            nx: Some(100),
            block: Some(16),
            ..Default::default()
        };
        let e = format!("{:#}", args.resolve().unwrap_err());
        assert!(e.contains("divisible"), "{e}");
    }
}
