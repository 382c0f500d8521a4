use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Context;
use proofgrade::corpus::{default_problems, load_problems};
use proofgrade::FeedbackCatalog;
use proofgrade_server::{load_model_dir, AppState, ServerConfig};

use crate::config::{Config, ConfigError};
use crate::pipeline::open_embedder;

pub fn serve(cfg: &Config) -> anyhow::Result<()> {
    let problems = match &cfg.paths.problems {
        Some(p) => load_problems(p).with_context(|| format!("cannot load problems {}", p.display()))?,
        None => default_problems(),
    };
    let graders = if cfg.paths.models.is_dir() {
        load_model_dir(&cfg.paths.models)?
    } else {
        tracing::warn!(dir = %cfg.paths.models.display(), "no model directory; only self-evaluation will work");
        Default::default()
    };
    let trained_with: BTreeSet<&str> = graders.values().map(|g| g.provider_id()).collect();
    let provider = match (&cfg.server.provider, trained_with.len()) {
        (Some(p), _) => p.clone(),
        (None, 0) => "test".to_string(),
        (None, 1) => trained_with.iter().next().expect("one provider").to_string(),
        (None, _) => {
            return Err(ConfigError(format!(
                "models use several providers ({}); choose one with --provider",
                trained_with.into_iter().collect::<Vec<_>>().join(", ")
            ))
            .into())
        }
    };
    let feedback = match &cfg.paths.feedback {
        Some(p) => FeedbackCatalog::load(p).with_context(|| format!("cannot load feedback catalog {}", p.display()))?,
        None => FeedbackCatalog::default(),
    };
    let embedder = Arc::new(open_embedder(cfg, &provider)?);

    let mut sc = ServerConfig::new(problems, embedder, cfg.paths.log.clone());
    sc.graders = graders;
    sc.feedback = feedback;
    sc.static_dir = cfg.paths.static_dir.clone();
    sc.max_attempts = cfg.server.max_attempts;
    sc.retry_after_secs = cfg.server.retry_after_secs;
    let state = AppState::new(sc)?;

    let bind = cfg.server.bind.clone();
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .with_context(|| format!("cannot bind {bind}"))?;
        println!("serving on http://{}", listener.local_addr()?);
        proofgrade_server::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        anyhow::Ok(())
    })?;
    Ok(())
}

pub struct ServeOverrides {
    pub bind: Option<String>,
    pub provider: Option<String>,
    pub models: Option<PathBuf>,
    pub problems: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub feedback: Option<PathBuf>,
    pub max_attempts: Option<u32>,
}

impl ServeOverrides {
    pub fn apply(self, cfg: &mut Config) {
        if let Some(v) = self.bind {
            cfg.server.bind = v;
        }
        if let Some(v) = self.provider {
            cfg.server.provider = Some(v);
        }
        if let Some(v) = self.models {
            cfg.paths.models = v;
        }
        if let Some(v) = self.problems {
            cfg.paths.problems = Some(v);
        }
        if let Some(v) = self.log {
            cfg.paths.log = v;
        }
        if let Some(v) = self.static_dir {
            cfg.paths.static_dir = Some(v);
        }
        if let Some(v) = self.feedback {
            cfg.paths.feedback = Some(v);
        }
        if let Some(v) = self.max_attempts {
            cfg.server.max_attempts = Some(v);
        }
    }
}
