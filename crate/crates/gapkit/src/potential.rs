//! Piecewise potentials on [0, pi]: construction, evaluation, classification,
//! reflection, blending, and the comparison functions used by the first-order
//! optimality checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign applied to the variable part of a composite potential.
/// Serialized as the integer 1 or -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        })
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(serde::de::Error::custom(format!("sign must be 1 or -1, got {other}"))),
        }
    }
}

/// Declared shape class of a potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    SingleWell,
    Convex,
    Step,
    None,
}

/// Values of one linear segment; `left == right` encodes a constant piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub left: f64,
    pub right: f64,
}

impl Segment {
    pub fn constant(v: f64) -> Self {
        Segment { left: v, right: v }
    }

    pub fn is_constant(&self) -> bool {
        self.left == self.right
    }
}

/// Piecewise-linear / piecewise-constant potential on [0, pi].
///
/// The stored data is the variable part `V1`; an optional `background` plays
/// the role of the fixed `V0`, and `sign` is applied to the variable part, so
/// the full potential is `V0 + sign * V1`. Values at interior jumps follow the
/// left-closed convention: on `[b_j, b_{j+1})` the j-th segment applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Segment>,
    pub class: ShapeClass,
    pub background: Option<Box<Potential>>,
    pub sign: Sign,
}

/// Admissible transition points of a single-well potential, reported as the
/// closed interval of all valid choices (least value first).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionInterval {
    pub min: f64,
    pub max: f64,
}

/// Outcome of shape classification. Constant potentials are both single-well
/// (any transition point) and convex, so the two facts are reported together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub single_well: Option<TransitionInterval>,
    pub convex: bool,
}

impl Classification {
    pub fn is_neither(&self) -> bool {
        self.single_well.is_none() && !self.convex
    }
}

fn check_breakpoints(breakpoints: &[f64]) -> Result<()> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidPotential("need at least two breakpoints".into()));
    }
    if (breakpoints[0] - 0.0).abs() > 1e-14 {
        return Err(Error::InvalidPotential("first breakpoint must be 0".into()));
    }
    if (breakpoints[breakpoints.len() - 1] - PI).abs() > 1e-12 {
        return Err(Error::InvalidPotential("last breakpoint must be pi".into()));
    }
    for w in breakpoints.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidPotential(format!(
                "breakpoints not strictly increasing at {} .. {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

impl Potential {
    pub fn new(
        breakpoints: Vec<f64>,
        segments: Vec<Segment>,
        class: ShapeClass,
        background: Option<Potential>,
        sign: Sign,
    ) -> Result<Self> {
        check_breakpoints(&breakpoints)?;
        if segments.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidPotential(format!(
                "{} segments do not match {} breakpoints",
                segments.len(),
                breakpoints.len()
            )));
        }
        for s in &segments {
            if !s.left.is_finite() || !s.right.is_finite() {
                return Err(Error::InvalidPotential("segment values must be finite".into()));
            }
        }
        if let Some(bg) = &background {
            if bg.background.is_some() {
                return Err(Error::InvalidPotential("background may not itself carry a background".into()));
            }
            if bg.sign != Sign::Plus {
                return Err(Error::InvalidPotential("background must carry sign +1".into()));
            }
        }
        let v = Potential {
            breakpoints,
            segments,
            class,
            background: background.map(Box::new),
            sign,
        };
        v.check_class_tag()?;
        Ok(v)
    }

    fn check_class_tag(&self) -> Result<()> {
        let c = self.classify(1e-12);
        match self.class {
            ShapeClass::SingleWell | ShapeClass::Step => {
                if c.single_well.is_none() {
                    return Err(Error::InvalidPotential(
                        "tagged single-well but values are not monotone down then up".into(),
                    ));
                }
            }
            ShapeClass::Convex => {
                if !c.convex {
                    return Err(Error::InvalidPotential(
                        "tagged convex but segment slopes are not non-decreasing".into(),
                    ));
                }
            }
            ShapeClass::None => {}
        }
        Ok(())
    }

    pub fn zero() -> Self {
        Potential::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Potential {
            breakpoints: vec![0.0, PI],
            segments: vec![Segment::constant(c)],
            class: ShapeClass::SingleWell,
            background: None,
            sign: Sign::Plus,
        }
    }

    /// Piecewise-constant potential from segment heights on the given breakpoints.
    pub fn piecewise_constant(breakpoints: Vec<f64>, heights: &[f64], class: ShapeClass) -> Result<Self> {
        let segments = heights.iter().map(|&h| Segment::constant(h)).collect();
        Potential::new(breakpoints, segments, class, None, Sign::Plus)
    }

    /// Continuous piecewise-linear potential from node values at the breakpoints.
    pub fn piecewise_linear(breakpoints: Vec<f64>, node_values: &[f64], class: ShapeClass) -> Result<Self> {
        if node_values.len() != breakpoints.len() {
            return Err(Error::InvalidPotential("one node value per breakpoint required".into()));
        }
        let segments = node_values
            .windows(2)
            .map(|w| Segment { left: w[0], right: w[1] })
            .collect();
        Potential::new(breakpoints, segments, class, None, Sign::Plus)
    }

    pub fn with_background(mut self, background: Potential) -> Result<Self> {
        if background.background.is_some() || background.sign != Sign::Plus {
            return Err(Error::InvalidPotential("background must be plain (sign +1, no nested background)".into()));
        }
        self.background = Some(Box::new(background));
        Ok(self)
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    fn segment_index(&self, x: f64) -> usize {
        // left-closed: x in [b_j, b_{j+1}) selects j; x = pi selects the last segment
        match self.breakpoints.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.segments.len() - 1),
            Err(i) => i - 1,
        }
    }

    /// Variable part `V1(x)` without sign or background.
    pub fn eval_variable(&self, x: f64) -> Result<f64> {
        if !(0.0..=PI + 1e-15).contains(&x) {
            return Err(Error::OutOfDomain { x });
        }
        let j = self.segment_index(x.min(PI));
        let (a, b) = (self.breakpoints[j], self.breakpoints[j + 1]);
        let s = &self.segments[j];
        let t = if b > a { (x.min(PI) - a) / (b - a) } else { 0.0 };
        Ok(s.left + t * (s.right - s.left))
    }

    /// Full potential `V0(x) + sign * V1(x)`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let v1 = self.eval_variable(x)?;
        let v0 = match &self.background {
            Some(bg) => bg.eval_variable(x)?,
            None => 0.0,
        };
        Ok(v0 + self.sign.factor() * v1)
    }

    /// Left limit of the variable part at x (equals the value except at jumps).
    pub fn eval_variable_left_limit(&self, x: f64) -> Result<f64> {
        if !(0.0..=PI + 1e-15).contains(&x) {
            return Err(Error::OutOfDomain { x });
        }
        if x <= 0.0 {
            return Ok(self.segments[0].left);
        }
        let j = match self.breakpoints.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
            Ok(i) => i.saturating_sub(1).min(self.segments.len() - 1),
            Err(i) => i - 1,
        };
        let (a, b) = (self.breakpoints[j], self.breakpoints[j + 1]);
        let s = &self.segments[j];
        let t = ((x.min(PI) - a) / (b - a)).min(1.0);
        Ok(s.left + t * (s.right - s.left))
    }

    /// Breakpoints of the full potential including the background's.
    pub fn total_breakpoints(&self) -> Vec<f64> {
        match &self.background {
            None => self.breakpoints.clone(),
            Some(bg) => merge_breakpoints(&self.breakpoints, &bg.breakpoints),
        }
    }

    /// Bounds of the variable part (exact: linear pieces attain extrema at ends).
    pub fn variable_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &self.segments {
            lo = lo.min(s.left.min(s.right));
            hi = hi.max(s.left.max(s.right));
        }
        (lo, hi)
    }

    /// Full potential approached from the left; differs from `evaluate` only at jumps.
    pub fn eval_total_left_limit(&self, x: f64) -> Result<f64> {
        let v1 = self.eval_variable_left_limit(x)?;
        let v0 = match &self.background {
            Some(bg) => bg.eval_variable_left_limit(x)?,
            None => 0.0,
        };
        Ok(v0 + self.sign.factor() * v1)
    }

    /// Bounds of the full potential over [0, pi]; exact because the total is
    /// linear between merged breakpoints.
    pub fn total_range(&self) -> (f64, f64) {
        let bps = self.total_breakpoints();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for w in bps.windows(2) {
            for v in [self.evaluate(w[0]).unwrap(), self.eval_total_left_limit(w[1]).unwrap()] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let v = self.evaluate(PI).unwrap();
        (lo.min(v), hi.max(v))
    }

    /// True when `0 <= V1 <= m` everywhere.
    pub fn is_bounded_by(&self, m: f64) -> bool {
        let (lo, hi) = self.variable_range();
        lo >= -1e-12 && hi <= m + 1e-12
    }

    /// Shape classification of the variable part.
    ///
    /// Single-well status comes with the full interval of admissible transition
    /// points; uniqueness of the transition point is not assumed. Convexity is
    /// decided by the non-decreasing-slope criterion (jumps break convexity).
    pub fn classify(&self, tol: f64) -> Classification {
        let n = self.segments.len();
        // largest x such that V1 is (essentially) non-increasing on [0, x]
        let mut fall_end = self.breakpoints[0];
        for j in 0..n {
            if j > 0 && self.segments[j].left > self.segments[j - 1].right + tol {
                break;
            }
            fall_end = self.breakpoints[j];
            if self.segments[j].right <= self.segments[j].left + tol {
                fall_end = self.breakpoints[j + 1];
            } else {
                break;
            }
        }
        // smallest x such that V1 is non-decreasing on [x, pi]
        let mut rise_start = self.breakpoints[n];
        for j in (0..n).rev() {
            if j + 1 < n && self.segments[j].right > self.segments[j + 1].left + tol {
                break;
            }
            rise_start = self.breakpoints[j + 1];
            if self.segments[j].right >= self.segments[j].left - tol {
                rise_start = self.breakpoints[j];
            } else {
                break;
            }
        }
        let single_well = if rise_start <= fall_end {
            Some(TransitionInterval { min: rise_start, max: fall_end })
        } else {
            None
        };

        let mut convex = true;
        for j in 0..n {
            if j > 0 {
                if (self.segments[j].left - self.segments[j - 1].right).abs() > tol {
                    convex = false;
                    break;
                }
                let len_prev = self.breakpoints[j] - self.breakpoints[j - 1];
                let len_cur = self.breakpoints[j + 1] - self.breakpoints[j];
                let slope_prev = (self.segments[j - 1].right - self.segments[j - 1].left) / len_prev;
                let slope_cur = (self.segments[j].right - self.segments[j].left) / len_cur;
                let slope_tol = tol / len_prev + tol / len_cur;
                if slope_cur < slope_prev - slope_tol {
                    convex = false;
                    break;
                }
            }
        }

        Classification { single_well, convex }
    }

    /// The reflected potential x -> V(pi - x); class tags are preserved and
    /// reflect is an involution on the representation.
    pub fn reflect(&self) -> Potential {
        let n = self.breakpoints.len();
        let breakpoints: Vec<f64> = (0..n).map(|i| (PI - self.breakpoints[n - 1 - i]).max(0.0)).collect();
        let mut breakpoints = breakpoints;
        breakpoints[0] = 0.0;
        *breakpoints.last_mut().unwrap() = PI;
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| Segment { left: s.right, right: s.left })
            .collect();
        Potential {
            breakpoints,
            segments,
            class: self.class,
            background: self.background.as_ref().map(|bg| Box::new(bg.reflect())),
            sign: self.sign,
        }
    }

    /// Values of the variable part at `x` approaching from inside segment data
    /// refined to include `extra` breakpoints; used by blend and perturbations.
    fn refined_to(&self, points: &[f64]) -> Potential {
        let mut bps = self.breakpoints.clone();
        for &p in points {
            if p > 0.0 && p < PI {
                match bps.binary_search_by(|b| b.partial_cmp(&p).unwrap()) {
                    Ok(_) => {}
                    Err(i) => bps.insert(i, p),
                }
            }
        }
        let segments = bps
            .windows(2)
            .map(|w| {
                // open-interval sampling keeps jump conventions intact
                let left = self.eval_variable(w[0]).unwrap();
                let right = self.eval_variable_left_limit(w[1]).unwrap();
                Segment { left, right }
            })
            .collect();
        Potential {
            breakpoints: bps,
            segments,
            class: self.class,
            background: self.background.clone(),
            sign: self.sign,
        }
    }

    /// Pointwise convex combination `(1 - kappa) V + kappa P` of the variable
    /// parts. The two potentials must share background and sign.
    pub fn blend(&self, other: &Potential, kappa: f64) -> Result<Potential> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::InvalidInput(format!("kappa {kappa} outside [0, 1]")));
        }
        if self.sign != other.sign {
            return Err(Error::IncompatibleDomains("blend requires equal signs".into()));
        }
        match (&self.background, &other.background) {
            (None, None) => {}
            (Some(a), Some(b)) if a == b => {}
            _ => return Err(Error::IncompatibleDomains("blend requires equal backgrounds".into())),
        }
        let bps = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        let a = self.refined_to(&bps);
        let b = other.refined_to(&bps);
        let segments: Vec<Segment> = a
            .segments
            .iter()
            .zip(b.segments.iter())
            .map(|(sa, sb)| Segment {
                left: sa.left + kappa * (sb.left - sa.left),
                right: sa.right + kappa * (sb.right - sa.right),
            })
            .collect();
        let mut out = Potential {
            breakpoints: bps,
            segments,
            class: ShapeClass::None,
            background: self.background.clone(),
            sign: self.sign,
        };
        let c = out.classify(1e-12);
        out.class = if c.single_well.is_some() {
            ShapeClass::SingleWell
        } else if c.convex {
            ShapeClass::Convex
        } else {
            ShapeClass::None
        };
        Ok(out)
    }
}

impl Potential {
    /// Pointwise sum of the variable parts: V1 + scale * other. The other
    /// potential acts as a raw direction and must be plain (sign +1, no
    /// background); the result keeps this potential's background and sign.
    pub fn add_scaled(&self, other: &Potential, scale: f64) -> Result<Potential> {
        if other.background.is_some() || other.sign != Sign::Plus {
            return Err(Error::IncompatibleDomains("direction must be a plain potential".into()));
        }
        let bps = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        let a = self.refined_to(&bps);
        let b = other.refined_to(&bps);
        let segments: Vec<Segment> = a
            .segments
            .iter()
            .zip(b.segments.iter())
            .map(|(sa, sb)| Segment {
                left: sa.left + scale * sb.left,
                right: sa.right + scale * sb.right,
            })
            .collect();
        let mut out = Potential {
            breakpoints: bps,
            segments,
            class: ShapeClass::None,
            background: self.background.clone(),
            sign: self.sign,
        };
        let c = out.classify(1e-12);
        out.class = if c.single_well.is_some() {
            ShapeClass::SingleWell
        } else if c.convex {
            ShapeClass::Convex
        } else {
            ShapeClass::None
        };
        Ok(out)
    }
}

fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.to_vec();
    for &x in b {
        match out.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(_) => {}
            Err(i) => out.insert(i, x),
        }
    }
    out
}

/// Comparison functions driving the first-order optimality checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationKind {
    /// Replace V on [x_minus, x_plus] by max(V(x_minus), V(x_plus)).
    Plateau { x_minus: f64, x_plus: f64 },
    /// Replace V on [0, anchor] by its left limit at the anchor.
    LeftFill { anchor: f64 },
    /// Replace V on [anchor, pi] by its value at the anchor.
    RightFill { anchor: f64 },
    /// Kink direction for the convex class: the unit tent, 0 at x_minus and
    /// x_plus, 1 at x_node.
    Hinge { x_minus: f64, x_node: f64, x_plus: f64 },
    /// One-sided hinge limits: (x - x_node) on [0, x_node], zero after,
    /// resp. (x_node - x) on [x_node, pi], zero before.
    WedgeLeft { x_node: f64 },
    WedgeRight { x_node: f64 },
}

/// Build the comparison function for the requested perturbation.
pub fn proof_perturbation(v: &Potential, kind: PerturbationKind) -> Result<Potential> {
    let in_domain = |x: f64| (0.0..=PI).contains(&x);
    match kind {
        PerturbationKind::Plateau { x_minus, x_plus } => {
            if !(in_domain(x_minus) && in_domain(x_plus) && x_minus < x_plus) {
                return Err(Error::AnchorsOutOfOrder(format!("plateau [{x_minus}, {x_plus}]")));
            }
            let c = v.eval_variable(x_minus)?.max(v.eval_variable(x_plus)?);
            let mut p = v.refined_to(&[x_minus, x_plus]);
            for (j, w) in p.breakpoints.clone().windows(2).enumerate() {
                if w[0] >= x_minus - 1e-15 && w[1] <= x_plus + 1e-15 {
                    p.segments[j] = Segment::constant(c);
                }
            }
            retag(p)
        }
        PerturbationKind::LeftFill { anchor } => {
            if !in_domain(anchor) {
                return Err(Error::AnchorsOutOfOrder(format!("left-fill anchor {anchor}")));
            }
            let c = v.eval_variable_left_limit(anchor)?;
            let mut p = v.refined_to(&[anchor]);
            for (j, w) in p.breakpoints.clone().windows(2).enumerate() {
                if w[1] <= anchor + 1e-15 {
                    p.segments[j] = Segment::constant(c);
                }
            }
            retag(p)
        }
        PerturbationKind::RightFill { anchor } => {
            if !in_domain(anchor) {
                return Err(Error::AnchorsOutOfOrder(format!("right-fill anchor {anchor}")));
            }
            let c = v.eval_variable(anchor)?;
            let mut p = v.refined_to(&[anchor]);
            for (j, w) in p.breakpoints.clone().windows(2).enumerate() {
                if w[0] >= anchor - 1e-15 {
                    p.segments[j] = Segment::constant(c);
                }
            }
            retag(p)
        }
        PerturbationKind::Hinge { x_minus, x_node, x_plus } => {
            if !(in_domain(x_minus) && in_domain(x_plus) && x_minus < x_node && x_node < x_plus) {
                return Err(Error::AnchorsOutOfOrder(format!(
                    "hinge anchors {x_minus} < {x_node} < {x_plus} violated"
                )));
            }
            let mut bps = vec![0.0, x_minus, x_node, x_plus, PI];
            bps.dedup_by(|u, w| (*u - *w).abs() < 1e-15);
            let mut nodes = Vec::with_capacity(bps.len());
            for &x in &bps {
                let val = if x <= x_minus || x >= x_plus {
                    0.0
                } else if x <= x_node {
                    (x - x_minus) / (x_node - x_minus)
                } else {
                    (x_plus - x) / (x_plus - x_node)
                };
                nodes.push(val);
            }
            Potential::piecewise_linear(bps, &nodes, ShapeClass::None)
        }
        PerturbationKind::WedgeLeft { x_node } => {
            if !(x_node > 0.0 && x_node <= PI) {
                return Err(Error::AnchorsOutOfOrder("wedge node must be interior".into()));
            }
            let (bps, nodes) = if x_node < PI {
                (vec![0.0, x_node, PI], vec![-x_node, 0.0, 0.0])
            } else {
                (vec![0.0, PI], vec![-x_node, 0.0])
            };
            Potential::piecewise_linear(bps, &nodes, ShapeClass::None)
        }
        PerturbationKind::WedgeRight { x_node } => {
            if !(x_node >= 0.0 && x_node < PI) {
                return Err(Error::AnchorsOutOfOrder("wedge node must be interior".into()));
            }
            let (bps, nodes) = if x_node > 0.0 {
                (vec![0.0, x_node, PI], vec![0.0, 0.0, x_node - PI])
            } else {
                (vec![0.0, PI], vec![0.0, -PI])
            };
            Potential::piecewise_linear(bps, &nodes, ShapeClass::None)
        }
    }
}

fn retag(mut p: Potential) -> Result<Potential> {
    let c = p.classify(1e-12);
    p.class = if c.single_well.is_some() {
        ShapeClass::SingleWell
    } else if c.convex {
        ShapeClass::Convex
    } else {
        ShapeClass::None
    };
    Ok(p)
}

/// Largest kappa in [0, 1] for which blend(V, V + hinge, kappa) stays convex,
/// judged by the sign of the blended second differences.
pub fn hinge_admissible_kappa(v: &Potential, hinge: &Potential) -> f64 {
    let bps = merge_breakpoints(&v.breakpoints, &hinge.breakpoints);
    let vr = v.refined_to(&bps);
    let hr = hinge.refined_to(&bps);
    let second_diff = |p: &Potential, j: usize| -> f64 {
        let len0 = p.breakpoints[j] - p.breakpoints[j - 1];
        let len1 = p.breakpoints[j + 1] - p.breakpoints[j];
        (p.segments[j].right - p.segments[j].left) / len1
            - (p.segments[j - 1].right - p.segments[j - 1].left) / len0
    };
    let mut kappa_max = 1.0f64;
    for j in 1..vr.segments.len() {
        let dv = second_diff(&vr, j);
        let dh = second_diff(&hr, j);
        if dh < -1e-14 {
            // (1 - k) dv + k (dv + dh) >= 0  =>  k <= dv / (-dh)
            kappa_max = kappa_max.min((dv / -dh).max(0.0));
        }
    }
    kappa_max.min(1.0)
}

/// Step potential: `M` on an end-adjacent subinterval, 0 elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPotential {
    pub m: f64,
    pub x_minus: f64,
    pub side: StepSide,
}

/// LEFT: support [x_minus, pi].  RIGHT: the reflection, support [0, x_minus].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSide {
    Left,
    Right,
}

impl StepPotential {
    pub fn new(m: f64, x_minus: f64, side: StepSide) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::InvalidPotential(format!("step height {m} must be positive")));
        }
        if !(x_minus > 0.0 && x_minus < PI) {
            return Err(Error::InvalidPotential(format!("step location {x_minus} outside (0, pi)")));
        }
        Ok(StepPotential { m, x_minus, side })
    }

    pub fn reflect(&self) -> StepPotential {
        StepPotential {
            m: self.m,
            x_minus: PI - self.x_minus,
            side: match self.side {
                StepSide::Left => StepSide::Right,
                StepSide::Right => StepSide::Left,
            },
        }
    }

    pub fn to_potential(&self) -> Potential {
        let (segments, breakpoints) = match self.side {
            StepSide::Left => (
                vec![Segment::constant(0.0), Segment::constant(self.m)],
                vec![0.0, self.x_minus, PI],
            ),
            StepSide::Right => (
                vec![Segment::constant(self.m), Segment::constant(0.0)],
                vec![0.0, self.x_minus, PI],
            ),
        };
        Potential {
            breakpoints,
            segments,
            class: ShapeClass::Step,
            background: None,
            sign: Sign::Plus,
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.to_potential().evaluate(x)
    }
}

/// Separated boundary conditions u cos(angle) - (p u') sin(angle) = 0 at each
/// endpoint; angle 0 is Dirichlet, pi/2 is Neumann.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub alpha: f64,
    pub beta: f64,
}

impl BoundaryConditions {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..PI).contains(&alpha) || !(0.0..PI).contains(&beta) {
            return Err(Error::InvalidInput(format!(
                "boundary angles ({alpha}, {beta}) must lie in [0, pi)"
            )));
        }
        Ok(BoundaryConditions { alpha, beta })
    }

    pub fn dirichlet() -> Self {
        BoundaryConditions { alpha: 0.0, beta: 0.0 }
    }

    pub fn neumann() -> Self {
        BoundaryConditions { alpha: PI / 2.0, beta: PI / 2.0 }
    }

    pub fn is_dirichlet(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }
}

/// Leading coefficient p(x): continuous piecewise-linear samples, uniformly
/// positive on [0, pi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientP {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
}

impl CoefficientP {
    pub fn constant(c: f64) -> Result<Self> {
        CoefficientP::new(vec![0.0, PI], vec![c, c])
    }

    pub fn one() -> Self {
        CoefficientP { xs: vec![0.0, PI], ps: vec![1.0, 1.0] }
    }

    pub fn new(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self> {
        check_breakpoints(&xs)?;
        if ps.len() != xs.len() {
            return Err(Error::InvalidPotential("one p sample per node required".into()));
        }
        for &p in &ps {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidPotential(format!("p sample {p} not uniformly positive")));
            }
        }
        Ok(CoefficientP { xs, ps })
    }

    pub fn p_min(&self) -> f64 {
        self.ps.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_constant(&self) -> bool {
        self.ps.iter().all(|&p| p == self.ps[0])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, PI);
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i - 1,
        };
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ps[i] + t * (self.ps[i + 1] - self.ps[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_left(m: f64, x_minus: f64) -> Potential {
        StepPotential::new(m, x_minus, StepSide::Left).unwrap().to_potential()
    }

    #[test]
    fn evaluate_zero_potential() {
        let v = Potential::zero();
        assert_eq!(v.evaluate(1.0).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_step_left_convention() {
        let v = step_left(10.0, 0.5);
        assert_eq!(v.evaluate(0.25).unwrap(), 0.0);
        assert_eq!(v.evaluate(2.0).unwrap(), 10.0);
        // left-closed at the jump: the support [x_minus, pi] includes its edge
        assert_eq!(v.evaluate(0.5).unwrap(), 10.0);
        assert_eq!(v.eval_variable_left_limit(0.5).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_rejects_out_of_domain() {
        let v = Potential::zero();
        assert!(matches!(v.evaluate(-0.1), Err(Error::OutOfDomain { .. })));
        assert!(matches!(v.evaluate(4.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn classify_constant_is_single_well_and_convex() {
        let v = Potential::constant(3.0);
        let c = v.classify(1e-12);
        let t = c.single_well.unwrap();
        assert_eq!(t.min, 0.0);
        assert_eq!(t.max, PI);
        assert!(c.convex);
    }

    #[test]
    fn classify_vee_single_well_and_convex() {
        let v = Potential::piecewise_linear(
            vec![0.0, PI / 2.0, PI],
            &[PI / 2.0, 0.0, PI / 2.0],
            ShapeClass::None,
        )
        .unwrap();
        let c = v.classify(1e-12);
        let t = c.single_well.unwrap();
        assert!((t.min - PI / 2.0).abs() < 1e-15);
        assert!((t.max - PI / 2.0).abs() < 1e-15);
        assert!(c.convex);
    }

    #[test]
    fn classify_double_wall_is_neither() {
        let v = Potential::piecewise_constant(
            vec![0.0, PI / 3.0, 2.0 * PI / 3.0, PI],
            &[0.0, 5.0, 0.0],
            ShapeClass::None,
        )
        .unwrap();
        let c = v.classify(1e-12);
        assert!(c.is_neither());
    }

    #[test]
    fn classify_step_single_well() {
        let v = step_left(7.0, 1.0);
        let c = v.classify(1e-12);
        let t = c.single_well.unwrap();
        assert_eq!(t.min, 0.0);
        assert_eq!(t.max, 1.0);
        assert!(!c.convex);
    }

    #[test]
    fn reflect_step_swaps_side() {
        let s = StepPotential::new(4.0, 1.0, StepSide::Left).unwrap();
        let r = s.reflect();
        assert_eq!(r.side, StepSide::Right);
        assert!((r.x_minus - (PI - 1.0)).abs() < 1e-15);
        assert_eq!(r.reflect(), s);
    }

    #[test]
    fn reflect_breakpoint_map() {
        let v = Potential::piecewise_constant(vec![0.0, 1.0, PI], &[2.0, 5.0], ShapeClass::None).unwrap();
        let r = v.reflect();
        assert!((r.breakpoints[1] - (PI - 1.0)).abs() < 1e-15);
        assert_eq!(r.evaluate(0.5).unwrap(), 5.0);
        assert_eq!(r.evaluate(3.0).unwrap(), 2.0);
    }

    #[test]
    fn blend_endpoints_and_linearity() {
        let v = Potential::zero();
        let p = step_left(6.0, 1.5);
        assert_eq!(v.blend(&p, 0.0).unwrap().evaluate(2.0).unwrap(), 0.0);
        assert_eq!(v.blend(&p, 0.5).unwrap().evaluate(2.0).unwrap(), 3.0);
        let q = p.blend(&p, 0.3).unwrap();
        for x in [0.1, 1.49, 1.5, 2.0, PI] {
            assert_eq!(q.evaluate(x).unwrap(), p.evaluate(x).unwrap());
        }
    }

    #[test]
    fn blend_rejects_mismatched_sign() {
        let v = Potential::zero().with_sign(Sign::Minus);
        let p = Potential::zero();
        assert!(v.blend(&p, 0.5).is_err());
    }

    #[test]
    fn plateau_on_constant_span_is_identity() {
        let v = Potential::constant(2.0);
        let p = proof_perturbation(&v, PerturbationKind::Plateau { x_minus: 1.0, x_plus: 2.0 }).unwrap();
        for x in [0.5, 1.0, 1.5, 2.5] {
            assert_eq!(p.evaluate(x).unwrap(), v.evaluate(x).unwrap());
        }
    }

    #[test]
    fn left_fill_on_zero_region_vanishes() {
        let v = step_left(10.0, 0.5);
        let p = proof_perturbation(&v, PerturbationKind::LeftFill { anchor: 0.5 }).unwrap();
        // V = 0 left of the step, so the fill value is the left limit 0
        for x in [0.0, 0.25, 0.49] {
            assert_eq!(p.evaluate(x).unwrap(), 0.0);
        }
        assert_eq!(p.evaluate(2.0).unwrap(), 10.0);
    }

    #[test]
    fn hinge_tent_shape() {
        let v = Potential::constant(1.0);
        let p = proof_perturbation(
            &v,
            PerturbationKind::Hinge { x_minus: 1.0, x_node: 1.5, x_plus: 2.0 },
        )
        .unwrap();
        assert_eq!(p.evaluate(1.0).unwrap(), 0.0);
        assert_eq!(p.evaluate(1.5).unwrap(), 1.0);
        assert_eq!(p.evaluate(2.0).unwrap(), 0.0);
        assert_eq!(p.evaluate(0.2).unwrap(), 0.0);
        assert!((p.evaluate(1.25).unwrap() - 0.5).abs() < 1e-15);
        assert!(proof_perturbation(
            &v,
            PerturbationKind::Hinge { x_minus: 1.5, x_node: 1.0, x_plus: 2.0 }
        )
        .is_err());
    }

    #[test]
    fn wedge_shapes() {
        let v = Potential::constant(1.0);
        let left = proof_perturbation(&v, PerturbationKind::WedgeLeft { x_node: 1.0 }).unwrap();
        assert!((left.evaluate(0.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(left.evaluate(1.0).unwrap(), 0.0);
        assert_eq!(left.evaluate(2.0).unwrap(), 0.0);
        let right = proof_perturbation(&v, PerturbationKind::WedgeRight { x_node: 2.0 }).unwrap();
        assert_eq!(right.evaluate(1.0).unwrap(), 0.0);
        assert_eq!(right.evaluate(2.0).unwrap(), 0.0);
        assert!((right.evaluate(PI).unwrap() - (2.0 - PI)).abs() < 1e-15);
    }

    #[test]
    fn class_preserved_under_fill_blends() {
        let v = Potential::piecewise_constant(
            vec![0.0, 0.7, 1.2, 2.1, PI],
            &[8.0, 3.0, 1.0, 6.0],
            ShapeClass::SingleWell,
        )
        .unwrap();
        for kind in [
            PerturbationKind::LeftFill { anchor: 0.7 },
            PerturbationKind::RightFill { anchor: 2.1 },
        ] {
            let p = proof_perturbation(&v, kind).unwrap();
            for kappa in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let b = v.blend(&p, kappa).unwrap();
                assert!(b.classify(1e-12).single_well.is_some(), "kind {kind:?} kappa {kappa}");
            }
        }
    }

    #[test]
    fn hinge_admissible_range_positive_for_kinked_convex() {
        let v = Potential::piecewise_linear(
            vec![0.0, 1.5, PI],
            &[3.0, 0.0, 4.0],
            ShapeClass::Convex,
        )
        .unwrap();
        let h = proof_perturbation(
            &v,
            PerturbationKind::Hinge { x_minus: 1.0, x_node: 1.5, x_plus: 2.0 },
        )
        .unwrap();
        let shifted = v.blend(&h, 0.0).unwrap(); // same breakpoints, kappa 0
        assert!(shifted.classify(1e-9).convex);
        let kappa_max = hinge_admissible_kappa(&v, &h);
        assert!(kappa_max > 0.0 && kappa_max <= 1.0);
    }

    #[test]
    fn json_round_trip() {
        let v = step_left(10.0, 0.5);
        let js = serde_json::to_string(&v).unwrap();
        let back: Potential = serde_json::from_str(&js).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn boundary_conditions_validation() {
        assert!(BoundaryConditions::new(0.0, 0.0).is_ok());
        assert!(BoundaryConditions::new(-0.1, 0.0).is_err());
        assert!(BoundaryConditions::new(0.0, PI).is_err());
        assert!(BoundaryConditions::dirichlet().is_dirichlet());
    }

    #[test]
    fn coefficient_p_requires_positivity() {
        assert!(CoefficientP::new(vec![0.0, PI], vec![1.0, 0.0]).is_err());
        let p = CoefficientP::new(vec![0.0, PI], vec![1.0, 2.0]).unwrap();
        assert!((p.eval(PI / 2.0) - 1.5).abs() < 1e-15);
        assert_eq!(p.p_min(), 1.0);
    }
}
