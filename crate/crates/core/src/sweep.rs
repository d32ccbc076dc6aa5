//! Parameter sweeps behind the mean-photon, SNR, averaged-QFI, advantage and
//! cross-correlation curves, written as CSV.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{self, moments_joint_photon, moments_quadrature};
use crate::oracle::{ProbeFamily, DEFAULT_TAIL};
use crate::probe::{self, fit_truncation, schmidt_state, GeneralizedCoherent, Sign};
use crate::{Error, Result};

/// Points per axis in the presets.
pub const PRESET_POINTS: usize = 151;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "r")]
    R,
    #[serde(rename = "N_S")]
    NS,
    #[serde(rename = "p")]
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Qfi,
    AveragedQfi,
    SnrOverEta,
    Advantage,
    G2,
    MeanPhoton,
}

impl Output {
    pub fn name(&self) -> &'static str {
        match self {
            Output::Qfi => "qfi",
            Output::AveragedQfi => "averaged_qfi",
            Output::SnrOverEta => "snr_over_eta",
            Output::Advantage => "advantage",
            Output::G2 => "g2",
            Output::MeanPhoton => "mean_photon",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: ProbeFamily,
    /// For MPA/MPS, `0` adds the TMSV baseline column.
    pub kappa_list: Vec<usize>,
    pub axis: Axis,
    pub axis_min: f64,
    pub axis_max: f64,
    pub axis_points: usize,
    #[serde(rename = "N_B")]
    pub n_b: f64,
    pub eta: f64,
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub chi: f64,
    #[serde(default = "one")]
    pub epsilon: f64,
}

fn one() -> f64 {
    1.0
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.axis_min < self.axis_max) {
            return Err(Error::Domain(format!(
                "axis_min {} must be below axis_max {}",
                self.axis_min, self.axis_max
            )));
        }
        if self.axis_points < 2 {
            return Err(Error::Domain("axis_points must be at least 2".into()));
        }
        if self.outputs.is_empty() {
            return Err(Error::Domain("no outputs requested".into()));
        }
        if self.kappa_list.is_empty() {
            return Err(Error::Domain("kappa_list is empty".into()));
        }
        if !(self.n_b >= 0.0) {
            return Err(Error::Domain(format!("N_B = {} must be nonnegative", self.n_b)));
        }
        use ProbeFamily::*;
        let axis_ok = match self.family {
            Coherent | GeneralizedCoherent => self.axis == Axis::NS,
            Tmsv | Mpa | Mps => matches!(self.axis, Axis::R | Axis::NS),
            PsiPlus | PsiMinus => self.axis == Axis::P,
        };
        if !axis_ok {
            return Err(Error::Domain(format!(
                "axis {:?} not available for family {}",
                self.axis,
                self.family.name()
            )));
        }
        if !self.family.is_entangled() && self.outputs.contains(&Output::G2) {
            return Err(Error::Domain(format!(
                "g2 is undefined for family {}",
                self.family.name()
            )));
        }
        if !matches!(self.family, Mpa | Mps) && self.kappa_list.iter().any(|&k| k != 0) {
            return Err(Error::Domain(format!(
                "family {} takes no photon number; use kappa_list [0]",
                self.family.name()
            )));
        }
        let lo_ok = match self.axis {
            Axis::P => self.axis_min >= 0.0 && self.axis_max <= 1.0,
            _ => self.axis_min >= 0.0,
        };
        if !lo_ok {
            return Err(Error::Domain("axis range outside the family's domain".into()));
        }
        Ok(())
    }

    pub fn axis_values(&self) -> Vec<f64> {
        let n = self.axis_points;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.axis_max
                } else {
                    self.axis_min + (self.axis_max - self.axis_min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["axis".to_string()];
        for o in &self.outputs {
            for k in &self.kappa_list {
                h.push(format!("{}_k{k}", o.name()));
            }
        }
        h
    }

    /// Evaluates every `(output, κ)` column at every axis point, in axis order.
    pub fn evaluate(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let xs = self.axis_values();
        xs.par_iter()
            .map(|&x| {
                let mut row = vec![x];
                let mut per_k = Vec::with_capacity(self.kappa_list.len());
                for &k in &self.kappa_list {
                    per_k.push(self.point(x, k)?);
                }
                for o in &self.outputs {
                    for vals in &per_k {
                        row.push(vals.get(*o));
                    }
                }
                Ok(row)
            })
            .collect()
    }

    fn point(&self, x: f64, kappa: usize) -> Result<PointValues> {
        match point_values(self, x, kappa) {
            Ok(v) => Ok(v),
            Err(Error::Domain(_)) | Err(Error::DegenerateMeasurement(_)) => Ok(PointValues::nan()),
            Err(e) => Err(e),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let rows = self.evaluate()?;
        let mut out = self.header().join(",");
        out.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format_g12(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let base = |family, axis, min, max, outputs: Vec<Output>| SweepSpec {
            family,
            kappa_list: vec![0, 1, 2, 3],
            axis,
            axis_min: min,
            axis_max: max,
            axis_points: PRESET_POINTS,
            n_b: 10.0,
            eta: 0.01,
            outputs,
            chi: 0.0,
            epsilon: 1.0,
        };
        use ProbeFamily::{Mpa, Mps};
        let spec = match name {
            "fig2" => base(Mpa, Axis::R, 0.0, 1.5, vec![Output::MeanPhoton, Output::SnrOverEta, Output::Qfi]),
            "fig3" => base(Mps, Axis::NS, 0.01, 10.0, vec![Output::AveragedQfi, Output::Advantage, Output::G2]),
            "fig2a" => base(Mpa, Axis::R, 0.0, 1.5, vec![Output::MeanPhoton]),
            "fig2b" => base(Mps, Axis::R, 0.0, 1.5, vec![Output::MeanPhoton]),
            "fig2c" => base(Mpa, Axis::R, 0.0, 1.5, vec![Output::SnrOverEta, Output::Qfi]),
            "fig2d" => base(Mps, Axis::R, 0.0, 1.5, vec![Output::SnrOverEta, Output::Qfi]),
            "fig3a" => base(Mpa, Axis::R, 1e-3, 1.5, vec![Output::AveragedQfi]),
            "fig3b" => base(Mps, Axis::R, 1e-3, 1.5, vec![Output::AveragedQfi]),
            "fig3c" => base(Mpa, Axis::NS, 0.1, 10.0, vec![Output::Advantage]),
            "fig3d" => base(Mps, Axis::NS, 0.1, 10.0, vec![Output::Advantage]),
            "fig3e" => base(Mpa, Axis::NS, 0.1, 10.0, vec![Output::G2]),
            "fig3f" => base(Mps, Axis::NS, 0.1, 10.0, vec![Output::G2]),
            other => return Err(Error::Domain(format!("unknown preset `{other}`"))),
        };
        Ok(spec)
    }
}

pub const PRESETS: [&str; 12] = [
    "fig2", "fig3", "fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b", "fig3c", "fig3d", "fig3e", "fig3f",
];

#[derive(Debug, Clone, Copy)]
struct PointValues {
    qfi: f64,
    n_s: f64,
    snr_over_eta: f64,
    g2: f64,
    n_b: f64,
}

impl PointValues {
    fn nan() -> Self {
        Self {
            qfi: f64::NAN,
            n_s: f64::NAN,
            snr_over_eta: f64::NAN,
            g2: f64::NAN,
            n_b: f64::NAN,
        }
    }

    fn get(&self, o: Output) -> f64 {
        match o {
            Output::Qfi => self.qfi,
            Output::MeanPhoton => self.n_s,
            Output::SnrOverEta => self.snr_over_eta,
            Output::G2 => self.g2,
            Output::AveragedQfi => metrics::averaged_qfi(self.qfi, self.n_s).unwrap_or(f64::NAN),
            Output::Advantage => metrics::quantum_advantage(self.qfi, self.n_s, self.n_b).unwrap_or(f64::NAN),
        }
    }
}

fn point_values(spec: &SweepSpec, x: f64, kappa: usize) -> Result<PointValues> {
    let n_b = spec.n_b;
    let eta = spec.eta;
    match spec.family {
        ProbeFamily::Coherent | ProbeFamily::GeneralizedCoherent => {
            let alpha = Complex64::new(x.sqrt(), 0.0);
            let a = if spec.family == ProbeFamily::Coherent {
                alpha
            } else {
                let cutoff = probe::poisson_cutoff(x, DEFAULT_TAIL);
                let gc = GeneralizedCoherent::new(alpha, spec.chi, spec.epsilon, cutoff)?;
                probe::coherent_a_expectation(&gc)?
            };
            let qfi = metrics::qfi_ci(a, n_b)?;
            let m = moments_quadrature(a, a.arg(), n_b, eta)?;
            Ok(PointValues {
                qfi,
                n_s: x,
                snr_over_eta: metrics::snr(&m)? / eta,
                g2: f64::NAN,
                n_b,
            })
        }
        ProbeFamily::PsiPlus | ProbeFamily::PsiMinus => {
            let sign = if spec.family == ProbeFamily::PsiPlus { Sign::Plus } else { Sign::Minus };
            let toy = probe::psi_toy(x, sign)?;
            let st = toy.schmidt();
            let m = moments_joint_photon(&st, n_b, eta)?;
            Ok(PointValues {
                qfi: metrics::qfi_psi(x, sign, n_b)?,
                n_s: toy.mean_photon(),
                snr_over_eta: metrics::snr(&m)? / eta,
                g2: metrics::g2_fock_sum(&st).unwrap_or(f64::NAN),
                n_b,
            })
        }
        ProbeFamily::Tmsv | ProbeFamily::Mpa | ProbeFamily::Mps => {
            let fam = if kappa == 0 {
                probe::SchmidtFamily::Added
            } else {
                spec.family.schmidt_family().expect("schmidt family")
            };
            let z = match spec.axis {
                Axis::R => x.tanh(),
                _ => probe::z_for_mean_photon(fam, kappa, x, DEFAULT_TAIL)?,
            };
            let trunc = fit_truncation(fam, z, kappa, 0.0, DEFAULT_TAIL)?;
            let st = schmidt_state(fam, z, kappa, &trunc)?;
            let n_s = probe::mean_photon(&st);
            let qfi = if kappa == 0 {
                metrics::qfi_tmsv(n_s, n_b)?
            } else {
                metrics::qfi_schmidt(&st, n_b)?
            };
            let m = moments_joint_photon(&st, n_b, eta)?;
            let sign = match fam {
                probe::SchmidtFamily::Added => Sign::Plus,
                probe::SchmidtFamily::Subtracted => Sign::Minus,
            };
            Ok(PointValues {
                qfi,
                n_s,
                snr_over_eta: metrics::snr(&m)? / eta,
                g2: metrics::g2_schmidt(sign, kappa, z).unwrap_or(f64::NAN),
                n_b,
            })
        }
    }
}

/// Formats like C's `%.12g`.
pub fn format_g12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 12;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        let mut s = String::new();
        let _ = write!(s, "{mant}e{sign}{:02}", exp.abs());
        s
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
