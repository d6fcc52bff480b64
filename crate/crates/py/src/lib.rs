//! Python bindings: models and queries, scenarios and the platoon checks,
//! agent programs, and zones.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use platoon_core::bdi;
use platoon_core::mc::{self, Options};
use platoon_core::platoon::{self as core, CompositionKind, ScenarioConfig};
use platoon_core::pvm;
use platoon_core::report;
use platoon_core::ta::model::Network;
use platoon_core::zones::{self, Bound as Dbm, ClockAtom};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Verdict of one query.
#[pyclass(frozen, get_all, skip_from_py_object, module = "platoon")]
#[derive(Clone)]
struct Report {
    query: String,
    verdict: String,
    holds: bool,
    states: usize,
    wall_seconds: f64,
    trace: Option<String>,
    note: Option<String>,
    record: String,
}

impl From<report::Report> for Report {
    fn from(r: report::Report) -> Self {
        Report {
            record: r.to_record(),
            verdict: r.verdict.as_str().to_string(),
            holds: r.verdict.holds(),
            query: r.query,
            states: r.states,
            wall_seconds: r.wall_seconds,
            trace: r.trace,
            note: r.note,
        }
    }
}

#[pymethods]
impl Report {
    fn __repr__(&self) -> String {
        format!("Report({:?}, {}, states={})", self.query, self.verdict, self.states)
    }

    fn __bool__(&self) -> bool {
        self.holds
    }
}

fn reports(rs: Vec<report::Report>) -> Vec<Report> {
    rs.into_iter().map(Report::from).collect()
}

/// A network of timed automata with the queries of its document.
#[pyclass(frozen, module = "platoon")]
struct Model {
    net: Network,
    #[pyo3(get)]
    queries: Vec<String>,
}

#[pymethods]
impl Model {
    /// Parses .pvm text.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let doc = pvm::parse_document(text).map_err(err)?;
        Ok(Model { net: doc.network, queries: doc.queries })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(err)?;
        Model::new(&text)
    }

    #[getter]
    fn templates(&self) -> Vec<String> {
        self.net.templates.iter().map(|t| t.name.clone()).collect()
    }

    #[getter]
    fn instances(&self) -> Vec<String> {
        self.net.instances.iter().map(|i| i.name.clone()).collect()
    }

    #[getter]
    fn clocks(&self) -> Vec<String> {
        self.net.clocks.clone()
    }

    #[pyo3(signature = (query, workers = 1, extrapolate = true))]
    fn check(&self, py: Python<'_>, query: &str, workers: usize, extrapolate: bool) -> PyResult<Report> {
        let options = Options { workers: workers.max(1), extrapolate };
        let o = py.detach(|| mc::check_query(&self.net, query, options)).map_err(err)?;
        Ok(report::Report::from_outcome(query, &o, &self.net).into())
    }

    /// Checks every query of the document.
    #[pyo3(signature = (workers = 1))]
    fn check_all(&self, py: Python<'_>, workers: usize) -> PyResult<Vec<Report>> {
        self.queries.iter().map(|q| self.check(py, q, workers, true)).collect()
    }

    /// The template as .pvm text; `id` binds the parameter of that name.
    #[pyo3(signature = (template, untimed = false, id = None))]
    fn template_text(&self, template: &str, untimed: bool, id: Option<i64>) -> PyResult<String> {
        let mut t = self.net.template(template).cloned().ok_or_else(|| err(format!("unknown template `{template}`")))?;
        if let Some(k) = id {
            t = t.bind("id", k).ok_or_else(|| err(format!("template `{template}` has no parameter `id`")))?;
        }
        if untimed && !t.is_untimed() {
            t = platoon_core::ta::automaton::untimed_projection(&t);
        }
        Ok(pvm::render_template(&t))
    }

    fn serialize(&self) -> String {
        pvm::serialize(&self.net, &self.queries)
    }

    fn __repr__(&self) -> String {
        format!("Model(instances={}, queries={})", self.net.instances.len(), self.queries.len())
    }
}

/// Platoon scenario: size, timing constants and oracle discretization.
#[pyclass(skip_from_py_object, module = "platoon")]
#[derive(Clone)]
struct Scenario {
    cfg: ScenarioConfig,
}

fn kind(name: &str) -> PyResult<CompositionKind> {
    match name {
        "timed" => Ok(CompositionKind::TimedVerification),
        "spatial" => Ok(CompositionKind::SpatialVerification),
        "agent" => Ok(CompositionKind::AgentVerification),
        _ => Err(err(format!("unknown composition `{name}` (timed, spatial, agent)"))),
    }
}

#[pymethods]
impl Scenario {
    /// Defaults, optionally overridden by .scn text.
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Scenario { cfg: core::parse_scenario(text).map_err(err)? })
    }

    #[getter]
    fn followers(&self) -> usize {
        self.cfg.followers
    }

    #[setter]
    fn set_followers(&mut self, n: usize) {
        self.cfg.followers = n;
    }

    #[getter]
    fn ch_l_b(&self) -> i64 {
        self.cfg.ch_l_b
    }

    #[setter]
    fn set_ch_l_b(&mut self, v: i64) {
        self.cfg.ch_l_b = v;
    }

    #[getter]
    fn lc_guard(&self) -> bool {
        self.cfg.lc_guard
    }

    #[setter]
    fn set_lc_guard(&mut self, v: bool) {
        self.cfg.lc_guard = v;
    }

    /// Composition `kind` ("timed", "spatial" or "agent") as a model whose
    /// queries are the matching obligations.
    #[pyo3(signature = (kind = "timed"))]
    fn build(&self, kind: &str) -> PyResult<Model> {
        let k = self::kind(kind)?;
        let net = core::build_platoon(&self.cfg, k).map_err(err)?;
        let queries = match k {
            CompositionKind::TimedVerification => core::obligation_queries(),
            CompositionKind::SpatialVerification => core::spatial_queries(),
            CompositionKind::AgentVerification => Vec::new(),
        };
        Ok(Model { net, queries })
    }

    #[pyo3(signature = (workers = 1))]
    fn proof_obligations(&self, py: Python<'_>, workers: usize) -> PyResult<Vec<Report>> {
        let options = Options { workers: workers.max(1), ..Options::default() };
        py.detach(|| core::run_proof_obligations(&self.cfg, options)).map(reports).map_err(err)
    }

    #[pyo3(signature = (workers = 1))]
    fn spatial_properties(&self, py: Python<'_>, workers: usize) -> PyResult<Vec<Report>> {
        let options = Options { workers: workers.max(1), ..Options::default() };
        py.detach(|| core::run_spatial_properties(&self.cfg, options)).map(reports).map_err(err)
    }

    fn safety_oracle(&self, py: Python<'_>) -> PyResult<Report> {
        py.detach(|| core::safety_oracle(&self.cfg)).map(Report::from).map_err(err)
    }

    #[pyo3(signature = (bound = 12))]
    fn trace_inclusion(&self, py: Python<'_>, bound: usize) -> PyResult<Report> {
        py.detach(|| core::trace_inclusion_evidence(&self.cfg, bound)).map(Report::from).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.cfg)
    }
}

/// Explores the BDI programs up to `depth` and checks `query` (`"eq1"` for
/// the joining property).
#[pyfunction]
#[pyo3(signature = (programs, query, depth = 100))]
fn check_agents(py: Python<'_>, programs: Vec<String>, query: &str, depth: usize) -> PyResult<Report> {
    let ps = programs
        .iter()
        .enumerate()
        .map(|(k, text)| bdi::parse_program(text, &format!("agent{}", k + 1)).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let q = bdi::parse_agent_query(query, &ps).map_err(err)?;
    py.detach(|| bdi::check_agent_property(&bdi::explore(&ps, depth), &q)).map(Report::from).map_err(err)
}

/// Difference-bound matrix over `clocks` clocks (numbered from 1).
#[pyclass(frozen, eq, skip_from_py_object, module = "platoon")]
#[derive(Clone, PartialEq)]
struct Zone {
    z: zones::Zone,
}

#[pymethods]
impl Zone {
    /// All clocks zero.
    #[staticmethod]
    fn init(clocks: usize) -> Zone {
        Zone { z: zones::Zone::init(clocks) }
    }

    /// Every non-negative valuation.
    #[staticmethod]
    fn unconstrained(clocks: usize) -> Zone {
        Zone { z: zones::Zone::unconstrained(clocks) }
    }

    #[getter]
    fn clocks(&self) -> usize {
        self.z.num_clocks()
    }

    fn check_clock(&self, k: usize) -> PyResult<()> {
        if k > self.z.num_clocks() {
            return Err(err(format!("clock {k} out of range")));
        }
        Ok(())
    }

    /// Intersects with `x_i - x_j < c` (strict) or `<= c`; index 0 is the
    /// reference clock.
    #[pyo3(signature = (i, j, c, strict = false))]
    fn constrain(&self, i: usize, j: usize, c: i32, strict: bool) -> PyResult<Zone> {
        self.check_clock(i)?;
        self.check_clock(j)?;
        Ok(Zone { z: self.z.and_atom(&ClockAtom::new(i, j, Dbm::new(c, strict))) })
    }

    fn up(&self) -> Zone {
        Zone { z: self.z.up() }
    }

    fn down(&self) -> Zone {
        Zone { z: self.z.down() }
    }

    #[pyo3(signature = (clock, value = 0))]
    fn reset(&self, clock: usize, value: i32) -> PyResult<Zone> {
        if clock == 0 {
            return Err(err("clock 0 cannot be reset"));
        }
        self.check_clock(clock)?;
        Ok(Zone { z: self.z.reset(clock, value) })
    }

    fn free(&self, clock: usize) -> PyResult<Zone> {
        if clock == 0 {
            return Err(err("clock 0 cannot be freed"));
        }
        self.check_clock(clock)?;
        Ok(Zone { z: self.z.free(clock) })
    }

    /// `max_const[k]` bounds clock `k`; entry 0 is ignored.
    fn extrapolate(&self, max_const: Vec<i32>) -> Zone {
        Zone { z: self.z.extrapolate(&max_const) }
    }

    fn intersection(&self, other: &Zone) -> PyResult<Zone> {
        if other.z.dim() != self.z.dim() {
            return Err(err("zones over different clocks"));
        }
        Ok(Zone { z: self.z.intersection(&other.z) })
    }

    fn includes(&self, other: &Zone) -> PyResult<bool> {
        self.z.includes(&other.z).map_err(err)
    }

    fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Membership of an integer valuation, one value per clock.
    fn contains(&self, values: Vec<i64>) -> PyResult<bool> {
        if values.len() != self.z.num_clocks() {
            return Err(err(format!("expected {} values", self.z.num_clocks())));
        }
        Ok(self.z.contains_integer(&values))
    }

    fn __repr__(&self) -> String {
        let names: Vec<String> = (0..=self.z.num_clocks()).map(|k| format!("x{k}")).collect();
        format!("Zone({})", self.z.render(&names))
    }
}

#[pymodule]
fn platoon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Report>()?;
    m.add_class::<Model>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<Zone>()?;
    m.add_function(wrap_pyfunction!(check_agents, m)?)?;
    Ok(())
}
