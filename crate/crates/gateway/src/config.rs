//! Daemon configuration: strict TOML, unknown keys rejected.
//!
//! ```toml
//! [gateway]
//! archive_dir = "archive"
//! ttl_secs = 3600
//! allowlist = ["kista/"]
//! clustering_program = "cluster.dsl"
//! clustering_examples = "fig9.json"
//! placement_program = "placement.dsl"
//! stats_file = "stats.json"
//! tick_ms = 1000
//!
//! [retry]
//! profile = "aggressive"
//! mqtt = { timeout_ms = 800, attempts = 1 }
//!
//! [[broker]]
//! address = "127.0.0.1:1883"
//! protocol = "mqtt"
//!
//! [harness]
//! mqtt_brokers = 1
//! coap_servers = 1
//! drop_connect_rate = 0.0
//! seed = 7
//! ```

use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context as _};
use edge_gateway_core::adapter::{Protocol, ProtocolRanking, RetryPolicy};
use serde::Deserialize;

pub const CONFIG_ENV: &str = "GATEWAY_CONFIG";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default)]
    pub gateway: GatewaySection,
    #[serde(default)]
    pub retry: RetrySection,
    #[serde(default, rename = "broker")]
    pub brokers: Vec<BrokerSection>,
    #[serde(default)]
    pub harness: Option<HarnessSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySection {
    pub archive_dir: PathBuf,
    /// Absent means clusters never expire.
    pub ttl_secs: Option<u64>,
    pub allowlist: Vec<String>,
    pub clustering_program: Option<PathBuf>,
    /// Used to synthesize a clustering program when no program file exists
    /// yet; the result is written to `clustering_program` if that is set.
    pub clustering_examples: Option<PathBuf>,
    pub placement_program: Option<PathBuf>,
    pub stats_file: Option<PathBuf>,
    pub tick_ms: u64,
}

impl Default for GatewaySection {
    fn default() -> Self {
        GatewaySection {
            archive_dir: PathBuf::from("archive"),
            ttl_secs: None,
            allowlist: Vec::new(),
            clustering_program: None,
            clustering_examples: None,
            placement_program: None,
            stats_file: None,
            tick_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetryProfile {
    #[default]
    Default,
    Aggressive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverride {
    pub timeout_ms: u64,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrySection {
    pub profile: RetryProfile,
    pub mqtt: Option<PolicyOverride>,
    pub coap: Option<PolicyOverride>,
}

impl RetrySection {
    pub fn policy(&self, protocol: Protocol) -> anyhow::Result<RetryPolicy> {
        let over = match protocol {
            Protocol::Mqtt => self.mqtt,
            Protocol::Coap => self.coap,
            Protocol::Custom(_) => None,
        };
        if let Some(o) = over {
            return RetryPolicy::new(Duration::from_millis(o.timeout_ms), o.attempts)
                .with_context(|| format!("retry.{protocol}"));
        }
        Ok(match self.profile {
            RetryProfile::Default => RetryPolicy::default_for(protocol),
            RetryProfile::Aggressive => RetryPolicy::aggressive_for(protocol),
        })
    }

    /// MQTT and CoAP adapters with this section's policies.
    pub fn ranking(&self) -> anyhow::Result<ProtocolRanking> {
        let mut r = ProtocolRanking::new();
        for p in [Protocol::Mqtt, Protocol::Coap] {
            r.register(p, self.policy(p)?);
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrokerSection {
    /// `ip:port`, or `host:port` resolved at load time.
    pub address: String,
    pub protocol: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessSection {
    pub mqtt_brokers: u32,
    pub coap_servers: u32,
    pub drop_connect_rate: f64,
    pub connack_delay_ms: u64,
    pub seed: u64,
}

impl Default for HarnessSection {
    fn default() -> Self {
        HarnessSection { mqtt_brokers: 1, coap_servers: 0, drop_connect_rate: 0.0, connack_delay_ms: 0, seed: 0 }
    }
}

impl GatewayConfig {
    pub fn parse(text: &str) -> anyhow::Result<GatewayConfig> {
        let cfg: GatewayConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, unless `GATEWAY_CONFIG` names another file. Relative
    /// paths inside the file are resolved against its directory.
    pub fn load(path: Option<&Path>) -> anyhow::Result<(PathBuf, GatewayConfig)> {
        let path = match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => match path {
                Some(p) => p.to_path_buf(),
                None => bail!("no config file given and {CONFIG_ENV} is unset"),
            },
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = GatewayConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok((path, cfg))
    }

    fn rebase(&mut self, dir: &Path) {
        let g = &mut self.gateway;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut g.archive_dir);
        for p in [&mut g.clustering_program, &mut g.clustering_examples, &mut g.placement_program, &mut g.stats_file]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.gateway.ttl_secs == Some(0) {
            bail!("gateway.ttl_secs must be positive");
        }
        if self.gateway.tick_ms == 0 {
            bail!("gateway.tick_ms must be positive");
        }
        self.retry.ranking()?;
        for b in &self.brokers {
            resolve(&b.address)?;
            if let Some(p) = &b.protocol {
                p.parse::<Protocol>().with_context(|| format!("broker {}", b.address))?;
            }
        }
        if let Some(h) = &self.harness {
            if !(0.0..1.0).contains(&h.drop_connect_rate) {
                bail!("harness.drop_connect_rate must be in [0, 1)");
            }
        }
        Ok(())
    }

    pub fn stats_path(&self) -> PathBuf {
        self.gateway.stats_file.clone().unwrap_or_else(|| self.gateway.archive_dir.join("stats.json"))
    }
}

/// Literal socket addresses are taken as-is; anything else goes through the
/// resolver so adapters only ever see IP endpoints.
pub fn resolve(address: &str) -> anyhow::Result<SocketAddr> {
    if let Ok(a) = address.parse() {
        return Ok(a);
    }
    address
        .to_socket_addrs()
        .with_context(|| format!("resolving {address}"))?
        .next()
        .with_context(|| format!("{address} resolved to no addresses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_valid() {
        let cfg = GatewayConfig::parse("").unwrap();
        assert!(cfg.brokers.is_empty());
        assert_eq!(cfg.retry.policy(Protocol::Mqtt).unwrap(), RetryPolicy::default_for(Protocol::Mqtt));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(GatewayConfig::parse("[gateway]\nttl = 3\n").is_err());
        assert!(GatewayConfig::parse("[nonsense]\n").is_err());
        assert!(GatewayConfig::parse("[[broker]]\naddress = \"127.0.0.1:1\"\nport = 3\n").is_err());
    }

    #[test]
    fn profiles_and_overrides() {
        let cfg = GatewayConfig::parse("[retry]\nprofile = \"aggressive\"\nmqtt = { timeout_ms = 250, attempts = 3 }\n").unwrap();
        assert_eq!(cfg.retry.policy(Protocol::Coap).unwrap(), RetryPolicy::aggressive_for(Protocol::Coap));
        let m = cfg.retry.policy(Protocol::Mqtt).unwrap();
        assert_eq!((m.timeout(), m.attempts()), (Duration::from_millis(250), 3));
        assert!(GatewayConfig::parse("[retry]\ncoap = { timeout_ms = 0, attempts = 1 }\n").is_err());
    }

    #[test]
    fn broker_validation() {
        assert!(GatewayConfig::parse("[[broker]]\naddress = \"127.0.0.1:1883\"\nprotocol = \"coap\"\n").is_ok());
        assert!(GatewayConfig::parse("[[broker]]\naddress = \"127.0.0.1:1883\"\nprotocol = \"amqp\"\n").is_err());
        assert!(GatewayConfig::parse("[harness]\ndrop_connect_rate = 1.0\n").is_err());
    }
}
