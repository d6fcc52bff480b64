use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{0}")]
    Invalid(String),
}

/// Platoon size, timing constants and oracle discretization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub followers: usize,
    pub lanes: u32,
    pub t_dl: i64,
    pub t_lc: i64,
    pub ch_l_b: i64,
    pub msg_latency: i64,
    /// Number of road cells in the oracle.
    pub oracle_cells: i64,
    /// Road length in metres in the oracle.
    pub oracle_road_len: i64,
    pub oracle_steps: usize,
    /// Whether lane changes respect the potential-collision guard.
    pub lc_guard: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            followers: 4,
            lanes: 2,
            t_dl: 5,
            t_lc: 30,
            ch_l_b: 10,
            msg_latency: 5,
            oracle_cells: 60,
            oracle_road_len: 300,
            oracle_steps: 200,
            lc_guard: true,
        }
    }
}

pub const NOMINAL_CHANGE: i64 = 20;
pub const GAP_MIN: i64 = 20;
pub const GAP_MAX: i64 = 40;

impl ScenarioConfig {
    pub fn with_followers(mut self, n: usize) -> Self {
        self.followers = n;
        self
    }

    /// Vehicle ids of the followers; the leader is vehicle 1.
    pub fn follower_ids(&self) -> Vec<i64> {
        (2..2 + self.followers as i64).collect()
    }

    /// Shortest physical lane change.
    pub fn lc_min(&self) -> i64 {
        (NOMINAL_CHANGE - self.ch_l_b).max(0)
    }

    /// Longest physical lane change, leaving `t_dl` of the envelope for
    /// waiting on free space.
    pub fn lc_max(&self) -> i64 {
        NOMINAL_CHANGE + self.ch_l_b - self.t_dl
    }

    pub fn cell_len(&self) -> i64 {
        self.oracle_road_len / self.oracle_cells
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.followers == 0 {
            return bad("at least one follower is required");
        }
        if self.lanes == 0 {
            return bad("at least one lane is required");
        }
        for (k, v) in [
            ("t_dl", self.t_dl),
            ("t_lc", self.t_lc),
            ("ch_l_b", self.ch_l_b),
            ("msg_latency", self.msg_latency),
            ("oracle_cells", self.oracle_cells),
            ("oracle_road_len", self.oracle_road_len),
        ] {
            if v <= 0 {
                return Err(ConfigError::Invalid(format!("{k} must be positive")));
            }
        }
        if self.t_dl >= self.t_lc {
            return bad("t_dl must be below t_lc");
        }
        if self.t_dl >= self.ch_l_b {
            return bad("t_dl must be below ch_l_b");
        }
        if self.oracle_road_len % self.oracle_cells != 0 {
            return bad("oracle_road_len must be a multiple of oracle_cells");
        }
        if self.oracle_steps == 0 {
            return bad("oracle_steps must be positive");
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment. Unset keys keep their
/// defaults.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut c = ScenarioConfig::default();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |msg: String| ConfigError::Syntax { line: k + 1, msg };
        let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let int = || value.parse::<i64>().map_err(|_| syntax(format!("`{value}` is not an integer")));
        match key {
            "followers" => c.followers = int()?.try_into().map_err(|_| syntax("followers must be non-negative".into()))?,
            "lanes" => c.lanes = int()?.try_into().map_err(|_| syntax("lanes must be non-negative".into()))?,
            "t_dl" => c.t_dl = int()?,
            "t_lc" => c.t_lc = int()?,
            "ch_l_b" => c.ch_l_b = int()?,
            "msg_latency" => c.msg_latency = int()?,
            "oracle_cells" => c.oracle_cells = int()?,
            "oracle_road_len" => c.oracle_road_len = int()?,
            "oracle_steps" => c.oracle_steps = int()?.try_into().map_err(|_| syntax("oracle_steps must be non-negative".into()))?,
            "lc_guard" => {
                c.lc_guard = value.parse().map_err(|_| syntax(format!("`{value}` is not `true` or `false`")))?;
            }
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
    }
    c.validate()?;
    Ok(c)
}
