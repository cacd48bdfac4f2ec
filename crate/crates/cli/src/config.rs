//! Line-oriented experiment configuration.
//!
//! The format is `key = value`, one per line, `#` comments allowed. Repeated
//! `init` and `change` keys build the subgroup parameters and the change
//! schedule. Every violated constraint is reported, not just the first.

use std::fmt;

use ldp_drift::params::{self, NoiseLevels, ProtocolParams, SlackMode};
use ldp_drift::sim::{ChangeEvent, Schedule, SubgroupModel};

/// Which protocol an experiment drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Bernoulli,
    Heavy,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Bernoulli => "bernoulli",
            Protocol::Heavy => "heavy",
        })
    }
}

/// A subgroup parameter as written in the config: scalar for the Bernoulli
/// protocol, a distribution (or shorthand) for the heavy protocol.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Uniform,
    /// Point mass on a 1-based dictionary value.
    Point(usize),
}

/// One `init = j:<group> p:<value>` line (group 1-based as written).
#[derive(Debug, Clone, PartialEq)]
pub struct InitEntry {
    pub group: usize,
    pub value: ParamValue,
}

/// One `change = t:<epoch> j:<group> p:<value> [r:<round>]` line.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEntry {
    pub epoch: usize,
    pub group: usize,
    pub round: usize,
    pub value: ParamValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditMode {
    Replay,
    Brute,
}

/// Parsed experiment configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub users: usize,
    pub groups: usize,
    pub min_group: usize,
    pub epoch_len: usize,
    pub epochs: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub dict_size: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub init: Vec<InitEntry>,
    pub changes: Vec<ChangeEntry>,
    pub seed: u64,
    pub runs: usize,
    pub slack_mode: SlackMode,
    pub output: String,
    pub mid_epoch_changes: bool,
    pub audit_mode: AuditMode,
    pub audit_pairs: usize,
    pub audit_gate_disabled: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: Protocol::Bernoulli,
            users: 1000,
            groups: 1,
            min_group: 1000,
            epoch_len: 100,
            epochs: 16,
            epsilon: 8.0,
            delta: 0.1,
            dict_size: None,
            sizes: None,
            init: Vec::new(),
            changes: Vec::new(),
            seed: 1,
            runs: 1,
            slack_mode: SlackMode::Proof,
            output: "out".into(),
            mid_epoch_changes: false,
            audit_mode: AuditMode::Replay,
            audit_pairs: 100,
            audit_gate_disabled: false,
        }
    }
}

/// One violated constraint, with its source line when it has one.
#[derive(Debug, Clone)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every constraint the config violated.
#[derive(Debug, Clone)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn issue(line: Option<usize>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        line,
        message: message.into(),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|e| format!("bad list element `{}`: {e}", tok.trim()))
        })
        .collect()
}

fn parse_param_value(s: &str) -> Result<ParamValue, String> {
    let s = s.trim();
    if s == "uniform" {
        return Ok(ParamValue::Uniform);
    }
    if let Some(v) = s.strip_prefix("point:") {
        let v: usize = v
            .trim()
            .parse()
            .map_err(|e| format!("bad point-mass value `{v}`: {e}"))?;
        if v == 0 {
            return Err("point-mass values are 1-based".into());
        }
        return Ok(ParamValue::Point(v));
    }
    if s.contains(',') {
        return Ok(ParamValue::Vector(parse_list::<f64>(s)?));
    }
    s.parse::<f64>()
        .map(ParamValue::Scalar)
        .map_err(|e| format!("bad parameter value `{s}`: {e}"))
}

/// Parse `tag:value` fields of an init/change entry.
fn parse_fields<'a>(s: &'a str, allowed: &[&str]) -> Result<Vec<(&'a str, &'a str)>, String> {
    let mut out = Vec::new();
    for tok in s.split_whitespace() {
        let (tag, value) = tok
            .split_once(':')
            .ok_or_else(|| format!("expected `tag:value`, got `{tok}`"))?;
        if !allowed.contains(&tag) {
            return Err(format!("unknown field `{tag}` (allowed: {})", allowed.join(", ")));
        }
        out.push((tag, value));
    }
    Ok(out)
}

fn parse_init(s: &str) -> Result<InitEntry, String> {
    let mut group = None;
    let mut value = None;
    for (tag, v) in parse_fields(s, &["j", "p"])? {
        match tag {
            "j" => group = Some(v.parse::<usize>().map_err(|e| format!("bad subgroup: {e}"))?),
            "p" => value = Some(parse_param_value(v)?),
            _ => unreachable!(),
        }
    }
    let group = group.ok_or("init needs a subgroup `j:`")?;
    if group == 0 {
        return Err("subgroups are 1-based".into());
    }
    Ok(InitEntry {
        group,
        value: value.ok_or("init needs a parameter `p:`")?,
    })
}

fn parse_change(s: &str) -> Result<ChangeEntry, String> {
    let mut epoch = None;
    let mut group = None;
    let mut round = 0usize;
    let mut value = None;
    for (tag, v) in parse_fields(s, &["t", "j", "p", "r"])? {
        match tag {
            "t" => epoch = Some(v.parse::<usize>().map_err(|e| format!("bad epoch: {e}"))?),
            "j" => group = Some(v.parse::<usize>().map_err(|e| format!("bad subgroup: {e}"))?),
            "r" => round = v.parse::<usize>().map_err(|e| format!("bad round: {e}"))?,
            "p" => value = Some(parse_param_value(v)?),
            _ => unreachable!(),
        }
    }
    let group = group.ok_or("change needs a subgroup `j:`")?;
    if group == 0 {
        return Err("subgroups are 1-based".into());
    }
    Ok(ChangeEntry {
        epoch: epoch.ok_or("change needs an epoch `t:`")?,
        group,
        round,
        value: value.ok_or("change needs a parameter `p:`")?,
    })
}

impl ExperimentConfig {
    /// Parse config text, applying defaults for absent keys. All syntactic
    /// and domain issues are collected before returning.
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let mut cfg = ExperimentConfig::default();
        let mut issues = Vec::new();
        let mut epsilon_set = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(issue(Some(line_no), format!("expected `key = value`, got `{line}`")));
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            if let Err(msg) = cfg.apply_kv(key, value) {
                issues.push(issue(Some(line_no), msg));
            }
            if key == "epsilon" {
                epsilon_set = true;
            }
        }
        let _ = epsilon_set;
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors(issues))
        }
    }

    /// Apply one key/value pair; flag overrides reuse the same grammar.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("{key}: bad value `{v}`: {e}"))
        }
        match key {
            "protocol" => {
                self.protocol = match value {
                    "bernoulli" => Protocol::Bernoulli,
                    "heavy" => Protocol::Heavy,
                    other => return Err(format!("protocol: expected bernoulli|heavy, got `{other}`")),
                }
            }
            "n" => self.users = num(key, value)?,
            "m" => self.groups = num(key, value)?,
            "L" => self.min_group = num(key, value)?,
            "ell" => self.epoch_len = num(key, value)?,
            "T" => self.epochs = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "d" => self.dict_size = Some(num(key, value)?),
            "sizes" => self.sizes = Some(parse_list(value).map_err(|e| format!("sizes: {e}"))?),
            "init" => self.init.push(parse_init(value).map_err(|e| format!("init: {e}"))?),
            "change" => self
                .changes
                .push(parse_change(value).map_err(|e| format!("change: {e}"))?),
            "seed" => self.seed = num(key, value)?,
            "runs" => self.runs = num(key, value)?,
            "slack_mode" => {
                self.slack_mode = match value {
                    "proof" => SlackMode::Proof,
                    "literal" => SlackMode::Literal,
                    other => return Err(format!("slack_mode: expected proof|literal, got `{other}`")),
                }
            }
            "output" => self.output = value.to_string(),
            "mid_epoch_changes" => {
                self.mid_epoch_changes = num::<bool>(key, value)?;
            }
            "audit_mode" => {
                self.audit_mode = match value {
                    "replay" => AuditMode::Replay,
                    "brute" => AuditMode::Brute,
                    other => return Err(format!("audit_mode: expected replay|brute, got `{other}`")),
                }
            }
            "audit_pairs" => self.audit_pairs = num(key, value)?,
            "audit_gate" => {
                self.audit_gate_disabled = match value {
                    "enforced" => false,
                    "disabled" => true,
                    other => {
                        return Err(format!("audit_gate: expected enforced|disabled, got `{other}`"))
                    }
                }
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Canonical serialization; parsing it back yields an equal config.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("protocol", self.protocol.to_string());
        kv("n", self.users.to_string());
        kv("m", self.groups.to_string());
        kv("L", self.min_group.to_string());
        kv("ell", self.epoch_len.to_string());
        kv("T", self.epochs.to_string());
        kv("epsilon", format_float(self.epsilon));
        kv("delta", format_float(self.delta));
        if let Some(d) = self.dict_size {
            kv("d", d.to_string());
        }
        if let Some(sizes) = &self.sizes {
            kv(
                "sizes",
                sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
            );
        }
        for e in &self.init {
            kv("init", format!("j:{} p:{}", e.group, format_param(&e.value)));
        }
        for c in &self.changes {
            let round = if c.round != 0 { format!(" r:{}", c.round) } else { String::new() };
            kv(
                "change",
                format!("t:{} j:{} p:{}{round}", c.epoch, c.group, format_param(&c.value)),
            );
        }
        kv("seed", self.seed.to_string());
        kv("runs", self.runs.to_string());
        kv(
            "slack_mode",
            match self.slack_mode {
                SlackMode::Proof => "proof".into(),
                SlackMode::Literal => "literal".into(),
            },
        );
        kv("output", self.output.clone());
        kv("mid_epoch_changes", self.mid_epoch_changes.to_string());
        kv(
            "audit_mode",
            match self.audit_mode {
                AuditMode::Replay => "replay".into(),
                AuditMode::Brute => "brute".into(),
            },
        );
        kv("audit_pairs", self.audit_pairs.to_string());
        kv(
            "audit_gate",
            if self.audit_gate_disabled { "disabled" } else { "enforced" }.to_string(),
        );
        out
    }

    /// Subgroup sizes: explicit, or a near-equal split of n into m blocks.
    pub fn resolved_sizes(&self) -> Vec<usize> {
        match &self.sizes {
            Some(s) => s.clone(),
            None => {
                let base = self.users / self.groups;
                let extra = self.users % self.groups;
                (0..self.groups)
                    .map(|g| base + (g < extra) as usize)
                    .collect()
            }
        }
    }
}

/// 17 significant digits: lossless f64 round-trip.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_param(v: &ParamValue) -> String {
    match v {
        ParamValue::Scalar(x) => format_float(*x),
        ParamValue::Vector(xs) => xs.iter().map(|x| format_float(*x)).collect::<Vec<_>>().join(","),
        ParamValue::Uniform => "uniform".into(),
        ParamValue::Point(v) => format!("point:{v}"),
    }
}

/// A fully validated Bernoulli experiment, ready to run.
#[derive(Debug)]
pub struct BernoulliPlan {
    pub params: ProtocolParams,
    pub levels: NoiseLevels,
    pub budget: params::ChangeBudget,
    pub model: SubgroupModel,
    pub schedule: Schedule<f64>,
}

/// A fully validated heavy-hitters experiment, ready to run.
#[derive(Debug)]
pub struct HeavyPlan {
    pub params: ProtocolParams,
    pub levels: NoiseLevels,
    pub budget: params::ChangeBudget,
    pub model: SubgroupModel,
    pub schedule: Schedule<Vec<f64>>,
}

#[derive(Debug)]
pub enum RunPlan {
    Bernoulli(Box<BernoulliPlan>),
    Heavy(Box<HeavyPlan>),
}

fn resolve_dist(v: &ParamValue, dict: usize) -> Result<Vec<f64>, String> {
    match v {
        ParamValue::Vector(xs) => Ok(xs.clone()),
        ParamValue::Uniform => Ok(vec![1.0 / dict as f64; dict]),
        ParamValue::Point(one_based) => {
            if *one_based > dict {
                return Err(format!("point-mass value {one_based} outside the dictionary [1, {dict}]"));
            }
            let mut h = vec![0.0; dict];
            h[one_based - 1] = 1.0;
            Ok(h)
        }
        ParamValue::Scalar(_) => Err("heavy protocol parameters must be distributions".into()),
    }
}

fn resolve_scalar(v: &ParamValue) -> Result<f64, String> {
    match v {
        ParamValue::Scalar(x) => Ok(*x),
        _ => Err("Bernoulli parameters must be scalar means".into()),
    }
}

impl ExperimentConfig {
    /// Semantic validation: protocol parameters (including the
    /// smallest-subgroup assumption with its computed minimum), noise-level
    /// feasibility, subgroup model, and the change schedule. Collects every
    /// violation it can reach.
    pub fn build(&self) -> Result<RunPlan, ConfigErrors> {
        let mut issues = Vec::new();
        let params = match ProtocolParams::new(
            self.users,
            self.groups,
            self.min_group,
            self.epoch_len,
            self.epochs,
            self.epsilon,
            self.delta,
        ) {
            Ok(p) => Some(p),
            Err(e) => {
                issues.push(issue(None, e.to_string()));
                None
            }
        };
        let params = match (params, self.protocol) {
            (Some(p), Protocol::Heavy) => match self.dict_size {
                Some(d) => p.with_dictionary(d).map_err(|e| {
                    ConfigErrors(vec![issue(None, e.to_string())])
                })?.into(),
                None => {
                    issues.push(issue(None, "d: required for the heavy protocol"));
                    None
                }
            },
            (p, _) => p,
        };

        let Some(params) = params else {
            return Err(ConfigErrors(issues));
        };

        if !params.assumption_holds() {
            issues.push(issue(
                None,
                format!(
                    "L = {} violates the smallest-subgroup assumption; need L > {}",
                    params.min_group,
                    format_float(params.assumption_min_group())
                ),
            ));
        }

        let levels = match self.protocol {
            Protocol::Bernoulli => NoiseLevels::bernoulli(&params),
            Protocol::Heavy => NoiseLevels::heavy(&params),
        };
        let levels = match levels {
            Ok(l) => Some(l),
            Err(e) => {
                issues.push(issue(None, e.to_string()));
                None
            }
        };

        let sizes = self.resolved_sizes();
        if sizes.len() != self.groups {
            issues.push(issue(
                None,
                format!("sizes: {} entries for m = {} subgroups", sizes.len(), self.groups),
            ));
        }
        let model = match SubgroupModel::from_sizes(sizes, self.users, self.min_group) {
            Ok(m) => Some(m),
            Err(e) => {
                issues.push(issue(None, e.to_string()));
                None
            }
        };

        for e in &self.init {
            if e.group > self.groups {
                issues.push(issue(
                    None,
                    format!("init: subgroup {} out of range [1, {}]", e.group, self.groups),
                ));
            }
        }
        let mut seen = vec![false; self.groups + 1];
        for e in &self.init {
            if e.group <= self.groups {
                if seen[e.group] {
                    issues.push(issue(None, format!("init: duplicate entry for subgroup {}", e.group)));
                }
                seen[e.group] = true;
            }
        }

        enum Built {
            Bernoulli(Schedule<f64>),
            Heavy(Schedule<Vec<f64>>),
        }

        let mut events_ok = true;
        let check_group = |c: &ChangeEntry, issues: &mut Vec<ConfigIssue>| {
            if c.group == 0 || c.group > self.groups {
                issues.push(issue(
                    None,
                    format!("change: subgroup {} out of range [1, {}]", c.group, self.groups),
                ));
                false
            } else {
                true
            }
        };

        let built = match self.protocol {
            Protocol::Bernoulli => {
                let mut initial = vec![0.5f64; self.groups];
                for e in &self.init {
                    if e.group <= self.groups {
                        match resolve_scalar(&e.value) {
                            Ok(x) => initial[e.group - 1] = x,
                            Err(msg) => issues.push(issue(None, format!("init: {msg}"))),
                        }
                    }
                }
                let mut events = Vec::new();
                for c in &self.changes {
                    if !check_group(c, &mut issues) {
                        events_ok = false;
                        continue;
                    }
                    match resolve_scalar(&c.value) {
                        Ok(x) => events.push(ChangeEvent {
                            epoch: c.epoch,
                            round: c.round,
                            group: c.group - 1,
                            value: x,
                        }),
                        Err(msg) => {
                            issues.push(issue(None, format!("change: {msg}")));
                            events_ok = false;
                        }
                    }
                }
                Schedule::new(
                    initial,
                    events,
                    self.epochs,
                    self.epoch_len,
                    self.mid_epoch_changes,
                    None,
                )
                .map(Built::Bernoulli)
            }
            Protocol::Heavy => {
                let dict = params.dict_size.unwrap_or(1);
                let mut initial = vec![vec![1.0 / dict as f64; dict]; self.groups];
                for e in &self.init {
                    if e.group <= self.groups {
                        match resolve_dist(&e.value, dict) {
                            Ok(h) => initial[e.group - 1] = h,
                            Err(msg) => issues.push(issue(None, format!("init: {msg}"))),
                        }
                    }
                }
                let mut events = Vec::new();
                for c in &self.changes {
                    if !check_group(c, &mut issues) {
                        events_ok = false;
                        continue;
                    }
                    match resolve_dist(&c.value, dict) {
                        Ok(h) => events.push(ChangeEvent {
                            epoch: c.epoch,
                            round: c.round,
                            group: c.group - 1,
                            value: h,
                        }),
                        Err(msg) => {
                            issues.push(issue(None, format!("change: {msg}")));
                            events_ok = false;
                        }
                    }
                }
                Schedule::new(
                    initial,
                    events,
                    self.epochs,
                    self.epoch_len,
                    self.mid_epoch_changes,
                    Some(dict),
                )
                .map(Built::Heavy)
            }
        };
        let built = match built {
            Ok(b) if events_ok => Some(b),
            Ok(_) => None,
            Err(e) => {
                issues.push(issue(None, e.to_string()));
                None
            }
        };

        let (Some(levels), Some(model), Some(built)) = (levels, model, built) else {
            return Err(ConfigErrors(issues));
        };
        if !issues.is_empty() {
            return Err(ConfigErrors(issues));
        }

        let budget = params::change_budget(&params, &levels);
        Ok(match built {
            Built::Bernoulli(schedule) => RunPlan::Bernoulli(Box::new(BernoulliPlan {
                params,
                levels,
                budget,
                model,
                schedule,
            })),
            Built::Heavy(schedule) => RunPlan::Heavy(Box::new(HeavyPlan {
                params,
                levels,
                budget,
                model,
                schedule,
            })),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::parse("protocol = bernoulli\nn = 400\nm = 1\nL = 400\nell = 400\nT = 8\nepsilon = 12\ndelta = 0.1\n").unwrap();
        assert_eq!(cfg.users, 400);
        assert_eq!(cfg.runs, 1);
        assert_eq!(cfg.slack_mode, SlackMode::Proof);
        assert!(cfg.build().is_ok());
    }

    #[test]
    fn out_of_range_delta_is_reported_by_name() {
        let cfg = ExperimentConfig::parse("delta = 1.5\n").unwrap();
        let err = cfg.build().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("delta"), "{text}");
        assert!(text.contains("(0, 1)"), "{text}");
    }

    #[test]
    fn assumption_violation_quotes_the_minimum() {
        let mut cfg = ExperimentConfig::default();
        cfg.users = 1000;
        cfg.groups = 2;
        cfg.min_group = 10;
        cfg.epoch_len = 100;
        cfg.epochs = 16;
        cfg.epsilon = 1.0;
        cfg.delta = 0.1;
        let err = cfg.build().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("smallest-subgroup"), "{text}");
        // The computed minimum for these parameters is ~706.6.
        assert!(text.contains("7.066"), "{text}");
    }

    #[test]
    fn unknown_keys_and_bad_lines_are_all_collected() {
        let err = ExperimentConfig::parse("foo = 1\nn tenthousand\nT = x\n").unwrap_err();
        assert_eq!(err.0.len(), 3);
        let text = err.to_string();
        assert!(text.contains("unknown key `foo`"));
        assert!(text.contains("line 2"));
        assert!(text.contains("line 3"));
    }

    #[test]
    fn canonical_round_trip() {
        let text = "protocol = heavy\nn = 200\nm = 1\nL = 200\nell = 300\nT = 8\nepsilon = 16\ndelta = 0.1\nd = 50\ninit = j:1 p:uniform\nchange = t:4 j:1 p:point:7\nseed = 9\nruns = 3\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let round = ExperimentConfig::parse(&cfg.to_canonical_string()).unwrap();
        assert_eq!(cfg, round);
    }

    #[test]
    fn sizes_default_to_near_equal_split() {
        let mut cfg = ExperimentConfig::default();
        cfg.users = 10;
        cfg.groups = 3;
        assert_eq!(cfg.resolved_sizes(), vec![4, 3, 3]);
    }
}
