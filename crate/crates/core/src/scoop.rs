//! Quasi-static scooping model: a thin card pinned between a fingernail
//! (right contact, friction `mu1`), the table (bottom contact, friction
//! `mu2`) and the pushing finger (left force `F_L` at angle `theta`).
//!
//! Axes: x points right toward the nail, y points up. Moments are about the
//! card's center of mass, counterclockwise positive, in N·mm.

use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

pub const GRAVITY: f64 = 9.81;

/// Largest angle the reduced moment form is evaluated at.
pub const THETA_MAX: f64 = 89.0 * (std::f64::consts::PI / 180.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoopProblem {
    /// Card thickness, mm.
    pub h: f64,
    /// Card length in the section plane, mm.
    pub l: f64,
    /// Height of the nail contact on the card edge, mm.
    pub d: f64,
    /// Angle between the finger force and the table, rad.
    pub theta: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Card mass, kg.
    pub m: f64,
    /// Finger force, N.
    #[serde(rename = "f_l")]
    pub f_l: f64,
}

impl Default for ScoopProblem {
    fn default() -> Self {
        Self::card()
    }
}

impl ScoopProblem {
    /// A bank card pressed at 30 degrees with 1 N.
    pub fn card() -> Self {
        Self {
            h: 1.2,
            l: 85.5,
            d: 0.6,
            theta: 30f64.to_radians(),
            mu1: 0.3,
            mu2: 0.4,
            m: 0.005,
            f_l: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Domain(m) => Error::Domain(format!("scoop: {m}")),
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        let fin = [self.h, self.l, self.d, self.theta, self.mu1, self.mu2, self.m, self.f_l]
            .iter()
            .all(|x| x.is_finite());
        if !fin {
            return Err(Error::Domain("scoop parameters must be finite".into()));
        }
        if self.h <= 0.0 || self.l <= 0.0 {
            return Err(Error::Domain(format!("h={} and l={} must be positive", self.h, self.l)));
        }
        if self.d < 0.0 || self.d > self.h {
            return Err(Error::Domain(format!("d={} outside [0, h={}]", self.d, self.h)));
        }
        if self.theta <= 0.0 || self.theta >= FRAC_PI_2 {
            return Err(Error::Domain(format!("theta={} outside (0, pi/2)", self.theta)));
        }
        if self.theta >= THETA_MAX {
            return Err(Error::Domain(format!(
                "theta={} is at or above 89 degrees, outside the model range",
                self.theta
            )));
        }
        if self.mu1 < 0.0 || self.mu2 < 0.0 || self.m < 0.0 || self.f_l < 0.0 {
            return Err(Error::Domain("mu1, mu2, m and F_L must be non-negative".into()));
        }
        Ok(())
    }

    pub fn weight(&self) -> f64 {
        self.m * GRAVITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoopSolution {
    pub f_rx: f64,
    pub f_ry: f64,
    pub f_bx: f64,
    pub f_by: f64,
    pub m_all: f64,
    pub k1: f64,
    pub k2: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipVerdict {
    FlipsCcw,
    NoFlip,
    Infeasible,
}

impl FlipVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            FlipVerdict::FlipsCcw => "flips_ccw",
            FlipVerdict::NoFlip => "no_flip",
            FlipVerdict::Infeasible => "infeasible",
        }
    }
}

/// Contact forces from the force balance, with the moment filled in from
/// the reduced form.
pub fn solve_forces(prob: &ScoopProblem) -> Result<ScoopSolution> {
    prob.validate()?;
    let (s, c) = prob.theta.sin_cos();
    let mg = prob.weight();
    let f_rx = (prob.f_l * (prob.mu2 * s + c) + prob.mu2 * mg) / (1.0 + prob.mu1 * prob.mu2);
    let f_ry = prob.mu1 * f_rx;
    let f_by = prob.f_l * s - f_ry + mg;
    let f_bx = prob.mu2 * f_by;
    let mut sol = ScoopSolution {
        f_rx,
        f_ry,
        f_bx,
        f_by,
        m_all: 0.0,
        k1: 0.0,
        k2: 0.0,
        feasible: f_by >= 0.0 && f_rx >= 0.0,
    };
    let (m_all, k1, k2) = moment_reduced(prob, &sol)?;
    sol.m_all = m_all;
    sol.k1 = k1;
    sol.k2 = k2;
    Ok(sol)
}

/// `M = K1 * F_Rx + K2`.
///
/// `K2` carries the table reaction's share of the weight,
/// `mg (h mu2 - l) / 2`, in addition to the friction term.
pub fn moment_reduced(prob: &ScoopProblem, sol: &ScoopSolution) -> Result<(f64, f64, f64)> {
    prob.validate()?;
    let ScoopProblem {
        h,
        l,
        d,
        theta,
        mu1,
        mu2,
        ..
    } = *prob;
    let (s, c) = theta.sin_cos();
    let mg = prob.weight();
    let shape = s * (h * mu2 - l) + c * (l * theta.tan() - h);
    let den = mu2 * s + c;
    let k1 = 0.5 * (2.0 * d - h + 2.0 * l * mu1 - mu1 * mu2 * h + (1.0 + mu1 * mu2) * shape / den);
    let k2 = -0.5 * mu2 * mg * shape / den + 0.5 * mg * (h * mu2 - l);
    Ok((k1 * sol.f_rx + k2, k1, k2))
}

/// Moment of all contact forces about the center of mass, term by term.
pub fn moment_direct(prob: &ScoopProblem, sol: &ScoopSolution) -> f64 {
    let ScoopProblem {
        h, l, d, theta, f_l, ..
    } = *prob;
    0.5 * (-(h - 2.0 * d) * sol.f_rx + l * sol.f_ry)
        + 0.5 * (h * sol.f_bx - l * sol.f_by)
        + 0.5 * (l * theta.tan() - h) * f_l * theta.cos()
}

pub fn flip_predicate(prob: &ScoopProblem) -> Result<FlipVerdict> {
    let sol = solve_forces(prob)?;
    Ok(if !sol.feasible {
        FlipVerdict::Infeasible
    } else if sol.m_all > 0.0 {
        FlipVerdict::FlipsCcw
    } else {
        FlipVerdict::NoFlip
    })
}

/// Grid axes for [`sweep`]; geometry and mass come from the base problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub theta: Vec<f64>,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub f_l: Vec<f64>,
}

impl SweepAxes {
    pub fn len(&self) -> usize {
        self.theta.len() * self.mu1.len() * self.mu2.len() * self.f_l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `n` evenly spaced values over `[lo, hi]`; a single value sits at `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub problem: ScoopProblem,
    /// `None` when the grid point is outside the model.
    pub outcome: Option<(ScoopSolution, FlipVerdict)>,
}

impl SweepRow {
    pub fn verdict_str(&self) -> &'static str {
        self.outcome.map_or("out_of_model", |(_, v)| v.as_str())
    }
}

pub const SWEEP_CSV_HEADER: &str = "theta_rad,mu1,mu2,F_L_N,F_Rx_N,F_By_N,M_all_Nmm,K1_mm,K2_Nmm,verdict";

/// Rows in theta-major order, `F_L` varying fastest.
pub fn sweep(base: &ScoopProblem, axes: &SweepAxes) -> Result<Vec<SweepRow>> {
    for (name, axis) in [
        ("theta", &axes.theta),
        ("mu1", &axes.mu1),
        ("mu2", &axes.mu2),
        ("f_l", &axes.f_l),
    ] {
        if axis.is_empty() {
            return Err(Error::Config(format!("sweep axis {name} is empty")));
        }
    }
    let (n1, n2, n3) = (axes.mu1.len(), axes.mu2.len(), axes.f_l.len());
    let rows = (0..axes.len())
        .into_par_iter()
        .map(|idx| {
            let problem = ScoopProblem {
                theta: axes.theta[idx / (n1 * n2 * n3)],
                mu1: axes.mu1[idx / (n2 * n3) % n1],
                mu2: axes.mu2[idx / n3 % n2],
                f_l: axes.f_l[idx % n3],
                ..*base
            };
            let outcome = solve_forces(&problem).ok().map(|sol| {
                let verdict = if !sol.feasible {
                    FlipVerdict::Infeasible
                } else if sol.m_all > 0.0 {
                    FlipVerdict::FlipsCcw
                } else {
                    FlipVerdict::NoFlip
                };
                (sol, verdict)
            });
            SweepRow { problem, outcome }
        })
        .collect();
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.problem;
        let _ = write!(out, "{},{},{},{},", p.theta, p.mu1, p.mu2, p.f_l);
        match r.outcome {
            Some((s, _)) => {
                let _ = write!(out, "{},{},{},{},{},", s.f_rx, s.f_by, s.m_all, s.k1, s.k2);
            }
            None => out.push_str(",,,,,"),
        }
        out.push_str(r.verdict_str());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn unloaded_card_rests_on_table() {
        let prob = ScoopProblem {
            f_l: 0.0,
            mu2: 0.0,
            ..ScoopProblem::card()
        };
        let sol = solve_forces(&prob).unwrap();
        assert_eq!((sol.f_rx, sol.f_ry, sol.f_bx), (0.0, 0.0, 0.0));
        assert!((sol.f_by - prob.weight()).abs() < 1e-15);
    }

    #[test]
    fn massless_frictionless_45_degrees() {
        let prob = ScoopProblem {
            m: 0.0,
            mu1: 0.0,
            mu2: 0.0,
            theta: FRAC_PI_4,
            ..ScoopProblem::card()
        };
        let sol = solve_forces(&prob).unwrap();
        assert!((sol.f_rx - FRAC_PI_4.cos()).abs() < 1e-15);
        assert!((sol.f_by - FRAC_PI_4.sin()).abs() < 1e-15);
    }

    #[test]
    fn card_case_forces() {
        let prob = ScoopProblem::card();
        let sol = solve_forces(&prob).unwrap();
        // (0.4 * 0.5 + cos 30) / 1.12 + 0.4 * 0.04905 / 1.12
        let expect = (0.4 * 0.5 + 3f64.sqrt() / 2.0 + 0.4 * 0.005 * 9.81) / 1.12;
        assert!((sol.f_rx - expect).abs() < 1e-12);
        assert!((sol.f_rx - 0.969326).abs() < 1e-6);
        let (s, c) = prob.theta.sin_cos();
        assert!(rel(sol.f_bx, sol.f_rx - prob.f_l * c) < 1e-12);
        assert!(rel(sol.f_by, prob.f_l * s - sol.f_ry + prob.weight()) < 1e-12);
        assert!(sol.feasible);
        assert!(rel(sol.m_all, moment_direct(&prob, &sol)) < 1e-9);
        assert!(sol.m_all > 0.0);
        assert_eq!(flip_predicate(&prob).unwrap(), FlipVerdict::FlipsCcw);
    }

    #[test]
    fn no_force_no_moment() {
        let prob = ScoopProblem {
            f_l: 0.0,
            mu2: 0.0,
            ..ScoopProblem::card()
        };
        let sol = solve_forces(&prob).unwrap();
        // Weight and table reaction are collinear only for a massless card.
        let massless = ScoopProblem { m: 0.0, ..prob };
        let s0 = solve_forces(&massless).unwrap();
        assert_eq!(s0.k2, 0.0);
        assert_eq!(s0.m_all, 0.0);
        assert_eq!(flip_predicate(&massless).unwrap(), FlipVerdict::NoFlip);
        assert!(rel(sol.m_all, moment_direct(&prob, &sol)) < 1e-12);
    }

    #[test]
    fn single_term_direct_moment() {
        let prob = ScoopProblem {
            h: 1.0,
            l: 10.0,
            d: 0.5,
            mu2: 0.0,
            f_l: 0.0,
            ..ScoopProblem::card()
        };
        let sol = ScoopSolution {
            f_rx: 0.0,
            f_ry: 0.0,
            f_bx: 0.0,
            f_by: 1.0,
            m_all: 0.0,
            k1: 0.0,
            k2: 0.0,
            feasible: true,
        };
        assert_eq!(moment_direct(&prob, &sol), -5.0);
        let zero = ScoopSolution { f_by: 0.0, ..sol };
        assert_eq!(moment_direct(&prob, &zero), 0.0);
    }

    #[test]
    fn lifting_card_is_infeasible() {
        // mu1 > tan(theta): pushing harder lifts the card off the table.
        let base = ScoopProblem {
            theta: 10f64.to_radians(),
            mu1: 0.5,
            ..ScoopProblem::card()
        };
        let mut seen_infeasible = false;
        for k in 0..200 {
            let prob = ScoopProblem {
                f_l: 0.01 * k as f64,
                ..base
            };
            let sol = solve_forces(&prob).unwrap();
            let v = flip_predicate(&prob).unwrap();
            assert_eq!(v == FlipVerdict::Infeasible, sol.f_by < 0.0);
            if seen_infeasible {
                assert_eq!(v, FlipVerdict::Infeasible);
            }
            seen_infeasible |= v == FlipVerdict::Infeasible;
        }
        assert!(seen_infeasible);
    }

    #[test]
    fn out_of_model_angles_rejected() {
        for theta in [0.0, -0.1, 89f64.to_radians(), FRAC_PI_2, 2.0] {
            let prob = ScoopProblem {
                theta,
                ..ScoopProblem::card()
            };
            assert!(matches!(solve_forces(&prob), Err(Error::Domain(_))));
        }
        let bad_d = ScoopProblem {
            d: 2.0,
            ..ScoopProblem::card()
        };
        assert!(solve_forces(&bad_d).is_err());
    }

    #[test]
    fn moment_slope_is_k1() {
        let a = ScoopProblem::card();
        let b = ScoopProblem { f_l: 3.0, ..a };
        let (sa, sb) = (solve_forces(&a).unwrap(), solve_forces(&b).unwrap());
        let slope = (moment_direct(&b, &sb) - moment_direct(&a, &sa)) / (sb.f_rx - sa.f_rx);
        assert!(rel(slope, sa.k1) < 1e-9);
        assert_eq!(sa.k1, sb.k1);
    }

    #[test]
    fn weight_only_enters_through_table_reaction() {
        // With a frictionless table, extra mass adds mg to F_By and nothing
        // else, so the moment drops by mg * l / 2.
        let base = ScoopProblem {
            mu2: 0.0,
            ..ScoopProblem::card()
        };
        let heavy = ScoopProblem {
            m: 2.0 * base.m,
            ..base
        };
        let (s0, s1) = (solve_forces(&base).unwrap(), solve_forces(&heavy).unwrap());
        assert_eq!(s0.f_rx, s1.f_rx);
        assert!(rel(s1.m_all - s0.m_all, -0.5 * base.weight() * base.l) < 1e-9);
    }

    #[test]
    fn sweep_trivial_and_cardinality() {
        let base = ScoopProblem {
            m: 0.0,
            ..ScoopProblem::card()
        };
        let one = SweepAxes {
            theta: vec![0.5],
            mu1: vec![0.3],
            mu2: vec![0.0],
            f_l: vec![0.0],
        };
        let rows = sweep(&base, &one).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].verdict_str(), "no_flip");

        let axes = SweepAxes {
            theta: linspace(0.05, 1.5, 10),
            mu1: linspace(0.0, 1.0, 10),
            mu2: linspace(0.0, 1.0, 10),
            f_l: linspace(0.0, 5.0, 10),
        };
        let rows = sweep(&ScoopProblem::card(), &axes).unwrap();
        assert_eq!(rows.len(), 10_000);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 10_001);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert!(rows.iter().all(|r| r.outcome.is_some()));
    }

    #[test]
    fn sweep_marks_out_of_model_points() {
        let axes = SweepAxes {
            theta: vec![0.5, 1.56],
            mu1: vec![0.3],
            mu2: vec![0.4],
            f_l: vec![1.0, -1.0],
        };
        let rows = sweep(&ScoopProblem::card(), &axes).unwrap();
        let verdicts: Vec<_> = rows.iter().map(|r| r.verdict_str()).collect();
        assert_eq!(verdicts, ["flips_ccw", "out_of_model", "out_of_model", "out_of_model"]);
        let csv = sweep_csv(&rows);
        assert!(csv.lines().nth(2).unwrap().ends_with(",,,,,out_of_model"));
        let empty = SweepAxes { f_l: vec![], ..axes };
        assert!(sweep(&ScoopProblem::card(), &empty).is_err());
    }
}
