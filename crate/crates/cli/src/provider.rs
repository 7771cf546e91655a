use styleprobe::embedding::{
    EmbeddingProvider, ProviderKind, ProviderSpec, DEFAULT_AUTHOR_WEIGHT, DEFAULT_DIMENSION,
};
use styleprobe::seed;

use crate::config::Context;
use crate::ProviderFailure;

pub const URL_ENV: &str = "STYLEPROBE_PROVIDER_URL";

#[derive(clap::Args, Debug, Clone)]
pub struct ProviderArgs {
    /// Embedding provider: mock, file or remote [default: mock]
    #[arg(long)]
    pub provider: Option<ProviderKind>,

    /// Embedding dimension [default: 512]
    #[arg(long)]
    pub dimension: Option<usize>,

    /// Vector store path (file) or base URL (remote); remote falls back to
    /// $STYLEPROBE_PROVIDER_URL
    #[arg(long)]
    pub location: Option<String>,

    /// Episodes per provider request [default: 64]
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Mock provider: weight of the author component [default: 0.8]
    #[arg(long)]
    pub author_weight: Option<f64>,
}

impl ProviderArgs {
    pub fn spec(&self, ctx: &Context) -> anyhow::Result<ProviderSpec> {
        let cfg = &ctx.config;
        let kind = match (&self.provider, &cfg.provider) {
            (Some(k), _) => *k,
            (None, Some(s)) => s.parse()?,
            (None, None) => ProviderKind::Mock,
        };
        let mut location = self.location.clone().or_else(|| cfg.location.clone());
        if location.is_none() && kind == ProviderKind::Remote {
            location = std::env::var(URL_ENV).ok().filter(|s| !s.is_empty());
        }
        let mock_seed = match kind {
            ProviderKind::Mock => seed::derive(ctx.seed()?, "mock"),
            _ => 0,
        };
        let spec = ProviderSpec {
            kind,
            dimension: self
                .dimension
                .or(cfg.dimension)
                .unwrap_or(DEFAULT_DIMENSION),
            location,
            batch_size: self.batch_size.or(cfg.batch_size).unwrap_or(64),
            mock_seed,
            author_weight: self
                .author_weight
                .or(cfg.author_weight)
                .unwrap_or(DEFAULT_AUTHOR_WEIGHT),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn build(&self, ctx: &Context) -> anyhow::Result<Box<dyn EmbeddingProvider>> {
        let spec = self.spec(ctx)?;
        log::info!("provider: {} (dimension {})", spec.kind, spec.dimension);
        spec.build().map_err(|e| ProviderFailure(e).into())
    }
}
