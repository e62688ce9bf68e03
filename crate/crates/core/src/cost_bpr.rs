//! Shared BPR-type latency `t_iu = t0_iu * f(theta' x_i / m_i)`.

use std::fmt;
use std::str::FromStr;

use log::warn;
use wardrop_qp::Scalar;

use crate::error::{Error, Result};
use crate::netmodel::{FlowState, MulticlassNetwork};

/// Named ground-truth latency functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundTruth {
    /// `1 + 0.15 z^4`
    Bpr015,
    /// `1 + z^4`
    Quartic1,
}

impl GroundTruth {
    pub fn name(self) -> &'static str {
        match self {
            GroundTruth::Bpr015 => "bpr015",
            GroundTruth::Quartic1 => "quartic1",
        }
    }

    pub fn coefficients<T: Scalar>(self) -> Vec<T> {
        let a = match self {
            GroundTruth::Bpr015 => 0.15,
            GroundTruth::Quartic1 => 1.0,
        };
        vec![T::one(), T::zero(), T::zero(), T::zero(), T::lit(a)]
    }

    pub fn eval<T: Scalar>(self, z: T) -> T {
        horner(&self.coefficients::<T>(), z)
    }
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroundTruth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bpr015" => Ok(GroundTruth::Bpr015),
            "quartic1" => Ok(GroundTruth::Quartic1),
            other => Err(Error::Config(format!(
                "unknown ground truth `{other}` (bpr015, quartic1)"
            ))),
        }
    }
}

/// `f(z) = sum_j beta_j z^j` with `beta_0 = 1`, kernel parameter kept for reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCost<T> {
    beta: Vec<T>,
    kernel_c: T,
}

impl<T: Scalar> PolynomialCost<T> {
    pub fn new(beta: Vec<T>, kernel_c: T) -> Result<Self> {
        if beta.len() < 2 {
            return Err(Error::Config("polynomial degree must be at least 1".into()));
        }
        if (beta[0] - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::Data(format!("beta_0 must be 1, got {}", beta[0])));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Data("non-finite coefficient".into()));
        }
        if !(kernel_c >= T::zero()) {
            return Err(Error::Config(format!(
                "kernel parameter must be >= 0, got {kernel_c}"
            )));
        }
        Ok(Self { beta, kernel_c })
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn degree(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn kernel_c(&self) -> T {
        self.kernel_c
    }
}

fn horner<T: Scalar>(beta: &[T], z: T) -> T {
    beta.iter().rev().fold(T::zero(), |acc, &b| acc * z + b)
}

pub fn eval_poly<T: Scalar>(p: &PolynomialCost<T>, z: T) -> T {
    horner(&p.beta, z)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatencyFn<T> {
    Truth(GroundTruth),
    Poly(PolynomialCost<T>),
    Constant,
}

impl<T: Scalar> LatencyFn<T> {
    pub fn eval(&self, z: T) -> T {
        match self {
            LatencyFn::Truth(g) => g.eval(z),
            LatencyFn::Poly(p) => eval_poly(p, z),
            LatencyFn::Constant => T::one(),
        }
    }
}

/// Latency function checked for `f(0) = 1` and for monotonicity on `[0, z_max]`.
#[derive(Debug, Clone)]
pub struct CostModel<T> {
    f: LatencyFn<T>,
}

impl<T: Scalar> CostModel<T> {
    pub fn new(f: LatencyFn<T>, z_max: T) -> Result<Self> {
        if (f.eval(T::zero()) - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::Data("latency must satisfy f(0) = 1".into()));
        }
        if z_max > T::zero() {
            let curve = sample_curve(&f, z_max, 1001)?;
            if !curve.decreases.is_empty() {
                return Err(Error::Data(format!(
                    "latency decreases on [0, {z_max}] near z = {}",
                    curve.points[curve.decreases[0]].0
                )));
            }
        }
        Ok(Self { f })
    }

    pub fn latency(&self) -> &LatencyFn<T> {
        &self.f
    }
}

pub fn congestion_ratio<T: Scalar>(x_i: &[T], theta: &[T], m_i: T) -> Result<T> {
    if !(m_i > T::zero()) {
        return Err(Error::Data(format!("capacity must be positive, got {m_i}")));
    }
    if x_i.len() != theta.len() {
        return Err(Error::Dimension(format!(
            "{} class flows for {} weights",
            x_i.len(),
            theta.len()
        )));
    }
    let weighted: T = x_i.iter().zip(theta).map(|(&x, &t)| t * x).sum();
    Ok(weighted / m_i)
}

/// Ratios `z_i` for every physical link.
pub fn congestion_ratios<T: Scalar>(
    flows: &FlowState<T>,
    net: &MulticlassNetwork<T>,
) -> Result<Vec<T>> {
    check_shape(flows, net)?;
    let theta = net.classes().theta();
    (0..net.link_count())
        .map(|i| congestion_ratio(flows.link(i), theta, net.capacity(i)))
        .collect()
}

fn check_shape<T: Scalar>(flows: &FlowState<T>, net: &MulticlassNetwork<T>) -> Result<()> {
    if flows.link_count() != net.link_count() || flows.class_count() != net.class_count() {
        return Err(Error::Dimension(format!(
            "flows are {} x {}, network has {} links and {} classes",
            flows.link_count(),
            flows.class_count(),
            net.link_count(),
            net.class_count()
        )));
    }
    Ok(())
}

/// Travel times per (link, class), stored class-major for the path search.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkCosts<T> {
    links: usize,
    t: Vec<T>,
}

impl<T: Scalar> LinkCosts<T> {
    /// Costs given class-major: `t[u * links + i]`.
    pub fn from_class_major(links: usize, classes: usize, t: Vec<T>) -> Result<Self> {
        if t.len() != links * classes {
            return Err(Error::Dimension(format!(
                "{} costs for {links} links x {classes} classes",
                t.len()
            )));
        }
        Ok(Self { links, t })
    }

    pub fn get(&self, link: usize, class: usize) -> T {
        self.t[class * self.links + link]
    }

    pub fn class(&self, class: usize) -> &[T] {
        &self.t[class * self.links..(class + 1) * self.links]
    }

    /// `sum_iu t_iu x_iu`
    pub fn dot(&self, flows: &FlowState<T>) -> T {
        let classes = self.t.len() / self.links.max(1);
        let mut s = T::zero();
        for u in 0..classes {
            for i in 0..self.links {
                s += self.get(i, u) * flows.get(i, u);
            }
        }
        s
    }
}

pub fn eval_latency<T: Scalar>(
    flows: &FlowState<T>,
    net: &MulticlassNetwork<T>,
    f: &LatencyFn<T>,
) -> Result<LinkCosts<T>> {
    let z = congestion_ratios(flows, net)?;
    let fz: Vec<T> = z.iter().map(|&v| f.eval(v)).collect();
    let links = net.link_count();
    let mut t = Vec::with_capacity(links * net.class_count());
    for u in 0..net.class_count() {
        for (i, &fv) in fz.iter().enumerate() {
            t.push(net.free_flow_time(i, u) * fv);
        }
    }
    Ok(LinkCosts { links, t })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve<T> {
    pub points: Vec<(T, T)>,
    /// Indices `k` with `f(z_k) < f(z_{k-1})`.
    pub decreases: Vec<usize>,
}

/// Uniform grid on `[0, z_max]`, endpoints included.
pub fn sample_curve<T: Scalar>(f: &LatencyFn<T>, z_max: T, grid_points: usize) -> Result<Curve<T>> {
    if grid_points < 2 {
        return Err(Error::Config(format!(
            "curve needs at least 2 grid points, got {grid_points}"
        )));
    }
    if !(z_max > T::zero()) || !z_max.is_finite() {
        return Err(Error::Config(format!(
            "curve range must be positive, got {z_max}"
        )));
    }
    let last = T::from_usize_lossy(grid_points - 1);
    let points: Vec<(T, T)> = (0..grid_points)
        .map(|k| {
            let z = if k == grid_points - 1 {
                z_max
            } else {
                z_max * T::from_usize_lossy(k) / last
            };
            (z, f.eval(z))
        })
        .collect();
    let decreases: Vec<usize> = (1..points.len())
        .filter(|&k| points[k].1 < points[k - 1].1)
        .collect();
    if let Some(&k) = decreases.first() {
        warn!(
            "sampled latency decreases at {} of {} grid points (first near z = {})",
            decreases.len(),
            grid_points,
            points[k].0
        );
    }
    Ok(Curve { points, decreases })
}

/// `max_k |f_hat(z_k) - f(z_k)| / f(z_k)` over a uniform grid on `[0, z_hi]`.
pub fn sup_relative_error<T: Scalar>(
    f_hat: &LatencyFn<T>,
    f: &LatencyFn<T>,
    z_hi: T,
    grid_points: usize,
) -> Result<T> {
    let truth = sample_curve(f, z_hi, grid_points)?;
    Ok(truth
        .points
        .iter()
        .map(|&(z, ft)| (f_hat.eval(z) - ft).abs() / ft.abs())
        .fold(T::zero(), T::max))
}

/// `z,f_true,f_hat` rows on a uniform grid; `f_true` is empty without a ground truth.
pub fn write_curve_csv<T: Scalar, W: std::io::Write>(
    f_hat: &LatencyFn<T>,
    truth: Option<GroundTruth>,
    z_max: T,
    grid_points: usize,
    w: W,
) -> Result<()> {
    let curve = sample_curve(f_hat, z_max, grid_points)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["z", "f_true", "f_hat"])?;
    for (z, fh) in curve.points {
        let ft = truth.map(|g| g.eval(z).to_string()).unwrap_or_default();
        out.write_record([z.to_string(), ft, fh.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
