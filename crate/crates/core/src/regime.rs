//! Sweeps over the closed-form metrics: trade-off curves, minimal-`|alpha|^2`
//! searches and best-protocol maps over two parameter axes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_form;
use crate::params::{ParamError, Protocol, ProtocolMetrics, ProtocolParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("empty alpha_sq grid")]
    EmptyGrid,
    #[error("no protocols selected")]
    NoProtocols,
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Geometric,
}

/// Inclusive sample points from `min` to `max`.
fn sample(min: f64, max: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>, String> {
    if points == 0 {
        return Err("zero points".into());
    }
    if !min.is_finite() || !max.is_finite() || min > max {
        return Err(format!("bad range [{min}, {max}]"));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let last = (points - 1) as f64;
    Ok(match spacing {
        Spacing::Linear => (0..points).map(|i| min + (max - min) * i as f64 / last).collect(),
        Spacing::Geometric => {
            if min <= 0.0 {
                return Err(format!("geometric spacing needs min > 0, got {min}"));
            }
            let ratio = (max / min).ln();
            (0..points).map(|i| min * (ratio * i as f64 / last).exp()).collect()
        }
    })
}

/// Mean photon numbers searched for each protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "geometric")]
    pub spacing: Spacing,
}

fn geometric() -> Spacing {
    Spacing::Geometric
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self { min: 1e-3, max: 0.5, points: 200, spacing: Spacing::Geometric }
    }
}

impl AlphaGrid {
    pub fn values(&self) -> Result<Vec<f64>, RegimeError> {
        if self.points == 0 {
            return Err(RegimeError::EmptyGrid);
        }
        let v = sample(self.min, self.max, self.points, self.spacing).map_err(RegimeError::InvalidAxis)?;
        if v[0] < 0.0 {
            return Err(RegimeError::InvalidAxis(format!("alpha_sq grid starts at {}", v[0])));
        }
        Ok(v)
    }
}

/// Parameter a map axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    EtaS,
    SigmaSc,
    SigmaDsc,
}

impl AxisParam {
    pub fn name(self) -> &'static str {
        match self {
            AxisParam::EtaS => "eta_s",
            AxisParam::SigmaSc => "sigma_sc",
            AxisParam::SigmaDsc => "sigma_dsc",
        }
    }

    pub fn apply(self, params: &ProtocolParams, value: f64) -> ProtocolParams {
        let mut p = *params;
        match self {
            AxisParam::EtaS => p.eta_s = value,
            AxisParam::SigmaSc => p.sigma_sc = value,
            AxisParam::SigmaDsc => p.sigma_dsc = value,
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: AxisParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    pub fn linear(param: AxisParam, min: f64, max: f64, points: usize) -> Self {
        Self { param, min, max, points, spacing: Spacing::Linear }
    }

    pub fn values(&self) -> Result<Vec<f64>, RegimeError> {
        sample(self.min, self.max, self.points, self.spacing)
            .map_err(|e| RegimeError::InvalidAxis(format!("{}: {e}", self.param.name())))
    }
}

/// Requirement an operating point must meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Fidelity(f64),
    Rate(f64),
}

impl Target {
    pub fn is_met(self, m: &ProtocolMetrics) -> bool {
        match self {
            Target::Fidelity(f) => m.fidelity >= f,
            Target::Rate(r) => m.rate_dimensionless >= r,
        }
    }

    /// The quantity a map maximises once the target is met: rate under a
    /// fidelity target, fidelity under a rate target.
    pub fn secondary(self, m: &ProtocolMetrics) -> f64 {
        match self {
            Target::Fidelity(_) => m.rate_dimensionless,
            Target::Rate(_) => m.fidelity,
        }
    }

    fn validate(self) -> Result<(), RegimeError> {
        let v = match self {
            Target::Fidelity(v) | Target::Rate(v) => v,
        };
        if v > 0.0 && v < 1.0 {
            Ok(())
        } else {
            Err(RegimeError::InvalidTarget(format!("{v} is outside (0, 1)")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub baseline: ProtocolParams,
    pub protocols: Vec<Protocol>,
    pub alpha_grid: AlphaGrid,
    pub axes: Vec<Axis>,
    pub target: Option<Target>,
    /// Earlier entries win exact ties.
    pub tie_order: Vec<Protocol>,
}

impl SweepSpec {
    pub fn new(baseline: ProtocolParams) -> Self {
        Self {
            baseline,
            protocols: Protocol::ALL.to_vec(),
            alpha_grid: AlphaGrid::default(),
            axes: Vec::new(),
            target: None,
            tie_order: Protocol::ALL.to_vec(),
        }
    }

    fn checked_protocols(&self) -> Result<Vec<Protocol>, RegimeError> {
        if self.protocols.is_empty() {
            return Err(RegimeError::NoProtocols);
        }
        // tie order first, then anything it omits in enum order
        let mut order: Vec<Protocol> = Vec::with_capacity(3);
        for p in self.tie_order.iter().chain(Protocol::ALL.iter()) {
            if self.protocols.contains(p) && !order.contains(p) {
                order.push(*p);
            }
        }
        Ok(order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub protocol: Protocol,
    pub alpha_sq: f64,
    /// Phase noise applied to this protocol (zero for DC).
    pub sigma: f64,
    pub metrics: ProtocolMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffTable {
    /// Sorted by `alpha_sq`, then protocol.
    pub rows: Vec<TradeoffRow>,
}

impl TradeoffTable {
    pub fn curve(&self, protocol: Protocol) -> impl Iterator<Item = &TradeoffRow> {
        self.rows.iter().filter(move |r| r.protocol == protocol)
    }
}

fn sigma_for(protocol: Protocol, p: &ProtocolParams) -> f64 {
    match protocol {
        Protocol::Dc => 0.0,
        Protocol::Sc => p.sigma_sc,
        Protocol::Dsc => p.sigma_dsc,
    }
}

/// Noisy closed-form metrics of every selected protocol across the grid.
pub fn tradeoff_curve(spec: &SweepSpec) -> Result<TradeoffTable, RegimeError> {
    spec.baseline.validate()?;
    let protocols = spec.checked_protocols()?;
    let grid = spec.alpha_grid.values()?;
    let mut rows = Vec::with_capacity(grid.len() * protocols.len());
    for &a in &grid {
        let p = spec.baseline.with_alpha_sq(a);
        let mut sorted = protocols.clone();
        sorted.sort();
        for protocol in sorted {
            let metrics = closed_form::evaluate(protocol, &p)?;
            rows.push(TradeoffRow { protocol, alpha_sq: a, sigma: sigma_for(protocol, &p), metrics });
        }
    }
    Ok(TradeoffTable { rows })
}

/// Smallest grid value meeting `target`, or `None` when no grid point does.
pub fn min_alpha_for_target(
    protocol: Protocol,
    params: &ProtocolParams,
    target: Target,
    grid: &[f64],
) -> Result<Option<f64>, ParamError> {
    for &a in grid {
        if target.is_met(&closed_form::evaluate(protocol, &params.with_alpha_sq(a))?) {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub alpha_sq: f64,
    pub metrics: ProtocolMetrics,
}

/// Grid point that meets `target` with the largest secondary metric, the
/// smallest `alpha_sq` among equals.
///
/// Under a rate target this is the minimal feasible `alpha_sq` (fidelity
/// falls with `alpha_sq`). Under a fidelity target it is the highest-rate
/// feasible point, since the minimal one would always be the grid floor.
pub fn operating_point(
    protocol: Protocol,
    params: &ProtocolParams,
    target: Target,
    grid: &[f64],
) -> Result<Option<OperatingPoint>, ParamError> {
    let mut best: Option<OperatingPoint> = None;
    for &a in grid {
        let metrics = closed_form::evaluate(protocol, &params.with_alpha_sq(a))?;
        if !target.is_met(&metrics) {
            continue;
        }
        let better = best.is_none_or(|b| target.secondary(&metrics) > target.secondary(&b.metrics));
        if better {
            best = Some(OperatingPoint { alpha_sq: a, metrics });
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeCell {
    /// Values of the first and second axis.
    pub coords: [f64; 2],
    /// `None` iff no protocol meets the target anywhere on the grid.
    pub winner: Option<Protocol>,
    pub winning_metric: Option<f64>,
    pub alpha_sq_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeGrid {
    pub axes: [Axis; 2],
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// Row-major: the second axis varies fastest.
    pub cells: Vec<RegimeCell>,
}

impl RegimeGrid {
    pub fn cell(&self, i: usize, j: usize) -> &RegimeCell {
        &self.cells[i * self.second.len() + j]
    }

    pub fn count(&self, winner: Option<Protocol>) -> usize {
        self.cells.iter().filter(|c| c.winner == winner).count()
    }
}

/// Winning protocol per cell of a two-axis map.
///
/// Each feasible protocol is scored at its [`operating_point`]; the highest
/// secondary metric wins and exact ties go to the earlier entry of
/// `tie_order`. Cells are evaluated in parallel and returned in row-major
/// order.
pub fn best_protocol_map(spec: &SweepSpec) -> Result<RegimeGrid, RegimeError> {
    let [ax, ay] = match spec.axes.as_slice() {
        [a, b] if a.param != b.param => [*a, *b],
        [_, _] => return Err(RegimeError::InvalidAxis("both axes vary the same parameter".into())),
        other => return Err(RegimeError::InvalidAxis(format!("a map needs two axes, got {}", other.len()))),
    };
    let target = spec.target.ok_or_else(|| RegimeError::InvalidTarget("a map needs a target".into()))?;
    target.validate()?;
    let protocols = spec.checked_protocols()?;
    let grid = spec.alpha_grid.values()?;
    let (first, second) = (ax.values()?, ay.values()?);
    for (a, v) in [(ax, &first), (ay, &second)] {
        for &x in v {
            a.param.apply(&spec.baseline, x).validate()?;
        }
    }

    let coords: Vec<[f64; 2]> = first.iter().flat_map(|&x| second.iter().map(move |&y| [x, y])).collect();
    let cells = coords
        .par_iter()
        .map(|&[x, y]| {
            let p = ay.param.apply(&ax.param.apply(&spec.baseline, x), y);
            let mut scored = Vec::with_capacity(protocols.len());
            for &protocol in &protocols {
                if let Some(op) = operating_point(protocol, &p, target, &grid)? {
                    scored.push((protocol, target.secondary(&op.metrics), op.alpha_sq));
                }
            }
            let cell = match select_winner(&scored) {
                Some((w, score, a)) => {
                    RegimeCell { coords: [x, y], winner: Some(w), winning_metric: Some(score), alpha_sq_used: Some(a) }
                }
                None => RegimeCell { coords: [x, y], winner: None, winning_metric: None, alpha_sq_used: None },
            };
            Ok(cell)
        })
        .collect::<Result<Vec<_>, ParamError>>()?;
    Ok(RegimeGrid { axes: [ax, ay], first, second, cells })
}

/// Highest score among candidates listed in tie order; the first wins ties.
fn select_winner(scored: &[(Protocol, f64, f64)]) -> Option<(Protocol, f64, f64)> {
    scored.iter().copied().fold(None, |best, c| match best {
        Some(b) if c.1 <= b.1 => Some(b),
        _ => Some(c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lab() -> ProtocolParams {
        ProtocolParams::new(0.32, 0.13, 0.7, 0.1)
    }

    fn fidelity_map() -> SweepSpec {
        let mut spec = SweepSpec::new(lab().with_sigmas(0.0, 0.5));
        spec.alpha_grid.points = 60;
        spec.axes = vec![Axis::linear(AxisParam::EtaS, 0.05, 1.0, 8), Axis::linear(AxisParam::SigmaSc, 0.0, 1.0, 11)];
        spec.target = Some(Target::Fidelity(0.98));
        spec
    }

    #[test]
    fn default_grid_spans_the_weak_pulse_range() {
        let g = AlphaGrid::default().values().unwrap();
        assert_eq!(g.len(), 200);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[199] - 0.5).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn table_rows_are_sorted_and_unique() {
        let mut spec = SweepSpec::new(lab());
        spec.alpha_grid.points = 30;
        let t = tradeoff_curve(&spec).unwrap();
        assert_eq!(t.rows.len(), 90);
        assert!(t.rows.windows(2).all(|w| (w[0].alpha_sq, w[0].protocol) < (w[1].alpha_sq, w[1].protocol)));
    }

    #[test]
    fn noisy_curves_sit_below_the_noise_ceiling() {
        let spec = SweepSpec::new(lab().with_sigmas(0.5, 0.5));
        let ceiling = 0.5 * (1.0 + (-0.125f64).exp());
        let t = tradeoff_curve(&spec).unwrap();
        for r in &t.rows {
            assert_eq!(r.sigma, if r.protocol == Protocol::Dc { 0.0 } else { 0.5 });
            if r.protocol != Protocol::Dc {
                assert!(r.metrics.fidelity <= ceiling + 1e-12);
            }
        }
        assert!(t.curve(Protocol::Dc).next().unwrap().metrics.fidelity > 0.99);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let mut spec = SweepSpec::new(lab());
        spec.alpha_grid.points = 0;
        assert_eq!(tradeoff_curve(&spec), Err(RegimeError::EmptyGrid));
        let mut spec = SweepSpec::new(lab());
        spec.protocols.clear();
        assert_eq!(tradeoff_curve(&spec), Err(RegimeError::NoProtocols));
    }

    #[test]
    fn min_alpha_examples() {
        let grid = AlphaGrid::default().values().unwrap();
        let noisy = lab().with_sigmas(0.5, 0.0);
        assert_eq!(min_alpha_for_target(Protocol::Sc, &noisy, Target::Fidelity(0.99), &grid), Ok(None));
        assert_eq!(min_alpha_for_target(Protocol::Sc, &lab(), Target::Rate(0.0), &grid), Ok(Some(grid[0])));
        for p in Protocol::ALL {
            assert!(min_alpha_for_target(p, &lab(), Target::Fidelity(0.98), &grid).unwrap().is_some());
        }
    }

    #[test]
    fn rate_target_operating_point_is_the_minimal_alpha() {
        let grid = AlphaGrid::default().values().unwrap();
        let p = lab().with_sigmas(0.3, 0.3);
        for protocol in Protocol::ALL {
            let t = Target::Rate(0.005);
            let op = operating_point(protocol, &p, t, &grid).unwrap().map(|o| o.alpha_sq);
            assert_eq!(op, min_alpha_for_target(protocol, &p, t, &grid).unwrap());
        }
    }

    #[test]
    fn map_cells_meet_their_target_when_reevaluated() {
        let spec = fidelity_map();
        let map = best_protocol_map(&spec).unwrap();
        assert_eq!(map.cells.len(), 88);
        for c in &map.cells {
            let (Some(w), Some(a)) = (c.winner, c.alpha_sq_used) else { continue };
            let p = AxisParam::SigmaSc.apply(&AxisParam::EtaS.apply(&spec.baseline, c.coords[0]), c.coords[1]);
            let m = closed_form::evaluate(w, &p.with_alpha_sq(a)).unwrap();
            assert!(m.fidelity >= 0.98);
            assert_eq!(Some(m.rate_dimensionless), c.winning_metric);
        }
    }

    #[test]
    fn low_noise_favours_single_click_and_high_noise_double_click() {
        let map = best_protocol_map(&fidelity_map()).unwrap();
        assert_eq!(map.cell(0, 0).winner, Some(Protocol::Sc));
        assert_eq!(map.cell(0, 10).winner, Some(Protocol::Dc));
    }

    #[test]
    fn ties_go_to_the_earlier_protocol() {
        let tied = [(Protocol::Dsc, 0.5, 0.1), (Protocol::Sc, 0.5, 0.2), (Protocol::Dc, 0.4, 0.3)];
        assert_eq!(select_winner(&tied), Some((Protocol::Dsc, 0.5, 0.1)));
        assert_eq!(select_winner(&tied[1..]), Some((Protocol::Sc, 0.5, 0.2)));
        assert_eq!(select_winner(&[]), None);
    }

    #[test]
    fn tie_order_keeps_unlisted_protocols() {
        let mut spec = SweepSpec::new(lab());
        spec.tie_order = vec![Protocol::Sc];
        assert_eq!(spec.checked_protocols().unwrap(), vec![Protocol::Sc, Protocol::Dc, Protocol::Dsc]);
    }

    #[test]
    fn axis_combinations_are_checked() {
        let mut spec = fidelity_map();
        spec.axes.pop();
        assert!(matches!(best_protocol_map(&spec), Err(RegimeError::InvalidAxis(_))));
        let mut spec = fidelity_map();
        spec.axes[1].param = AxisParam::EtaS;
        assert!(matches!(best_protocol_map(&spec), Err(RegimeError::InvalidAxis(_))));
        let mut spec = fidelity_map();
        spec.target = Some(Target::Fidelity(1.2));
        assert!(matches!(best_protocol_map(&spec), Err(RegimeError::InvalidTarget(_))));
    }

    #[test]
    fn maps_are_reproducible() {
        assert_eq!(best_protocol_map(&fidelity_map()).unwrap(), best_protocol_map(&fidelity_map()).unwrap());
    }

    proptest! {
        #[test]
        fn fidelity_falls_and_rate_ordering_holds_on_the_grid(
            eta_c in 0.05f64..1.0,
            eta_s in 0.05f64..0.6,
            eta_d in 0.05f64..1.0,
        ) {
            // DSC drops below DC only for a server transmission above about
            // 0.63 together with a detected mean above about 0.28
            let mut spec = SweepSpec::new(ProtocolParams::new(eta_c, eta_s, eta_d, 0.1));
            spec.alpha_grid.points = 50;
            let t = tradeoff_curve(&spec).unwrap();
            for p in Protocol::ALL {
                let f: Vec<f64> = t.curve(p).map(|r| r.metrics.fidelity).collect();
                prop_assert!(f.windows(2).all(|w| w[1] < w[0]), "{p} fidelity not decreasing");
            }
            for chunk in t.rows.chunks(3) {
                let [dc, dsc, sc] = [chunk[0].metrics, chunk[1].metrics, chunk[2].metrics];
                prop_assert!(sc.rate_dimensionless > dsc.rate_dimensionless);
                prop_assert!(dsc.rate_dimensionless > dc.rate_dimensionless);
            }
        }
    }
}
