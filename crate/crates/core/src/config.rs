//! JSON run configuration. Precedence: command-line flags, then the file,
//! then built-in case defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cases::{CaseId, CaseSettings};
use crate::error::{Error, Result};
use crate::geometry::{FlowerParams, SdfWeightParams};
use crate::kernel::MultiIndex;
use crate::problem::{BoundaryConstraint, ConstraintKind, LinearOperator, OperatorTerm, ProblemSpec, ScalarField};
use crate::sampling::{softmax_lengths, Dimension, DomainBounds};
use crate::solver::SolveOptions;

/// Partial [`CaseSettings`]; absent keys keep their current value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettingsPatch {
    pub lengths: Option<Vec<f64>>,
    /// Alternative to `lengths`, mapped through softmax.
    pub logits: Option<Vec<f64>>,
    pub lengths_y: Option<Vec<f64>>,
    pub logits_y: Option<Vec<f64>>,
    pub points_per_partition: Option<usize>,
    pub width_scale: Option<f64>,
    pub w_bc: Option<f64>,
    pub boundary_points: Option<usize>,
    pub flower: Option<FlowerParams>,
    pub sdf_resolution: Option<usize>,
    pub sdf_weighting: Option<SdfWeightParams>,
    /// `true` drops SDF weighting (uniform PDE rows).
    pub uniform_weights: Option<bool>,
    pub solver: Option<SolveOptions>,
}

fn pick(lengths: &Option<Vec<f64>>, logits: &Option<Vec<f64>>, key: &str) -> Result<Option<Vec<f64>>> {
    match (lengths, logits) {
        (Some(_), Some(_)) => Err(Error::config(format!("`{key}` and its logits are mutually exclusive"))),
        (Some(l), None) => Ok(Some(l.clone())),
        (None, Some(z)) => Ok(Some(softmax_lengths(z).map_err(|e| Error::config(format!("`{key}` logits: {e}")))?)),
        (None, None) => Ok(None),
    }
}

impl SettingsPatch {
    pub fn apply(&self, s: &mut CaseSettings) -> Result<()> {
        if let Some(l) = pick(&self.lengths, &self.logits, "lengths")? {
            s.lengths = l;
        }
        if let Some(l) = pick(&self.lengths_y, &self.logits_y, "lengths_y")? {
            s.lengths_y = Some(l);
        }
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { s.$f = v.clone(); })*};
        }
        set!(points_per_partition, width_scale, w_bc, boundary_points, sdf_resolution, solver);
        if let Some(f) = self.flower {
            s.flower = Some(f);
        }
        if let Some(w) = self.sdf_weighting {
            s.sdf_weighting = Some(w);
        }
        if self.uniform_weights == Some(true) {
            if self.sdf_weighting.is_some() {
                return Err(Error::config("`uniform_weights` conflicts with `sdf_weighting`"));
            }
            s.sdf_weighting = None;
        }
        Ok(())
    }

    /// Later patches win.
    pub fn merge(mut self, over: &SettingsPatch) -> SettingsPatch {
        macro_rules! over {
            ($($f:ident),*) => {$(if over.$f.is_some() { self.$f = over.$f.clone(); })*};
        }
        if over.lengths.is_some() || over.logits.is_some() {
            self.lengths = over.lengths.clone();
            self.logits = over.logits.clone();
        }
        if over.lengths_y.is_some() || over.logits_y.is_some() {
            self.lengths_y = over.lengths_y.clone();
            self.logits_y = over.logits_y.clone();
        }
        over!(points_per_partition, width_scale, w_bc, boundary_points, flower, sdf_resolution, solver);
        if over.uniform_weights == Some(true) {
            self.sdf_weighting = None;
            self.uniform_weights = Some(true);
        } else if over.sdf_weighting.is_some() {
            self.sdf_weighting = over.sdf_weighting;
            self.uniform_weights = None;
        }
        self
    }
}

/// Named closed-form scalar fields usable as sources and exact solutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `amplitude · sin(omega x)`
    Sin {
        #[serde(default = "one")]
        amplitude: f64,
        omega: f64,
    },
    /// `amplitude · cos(omega x)`
    Cos {
        #[serde(default = "one")]
        amplitude: f64,
        omega: f64,
    },
    /// `amplitude · sin(kx x) cos(ky y)`
    SinCos {
        #[serde(default = "one")]
        amplitude: f64,
        kx: f64,
        ky: f64,
    },
    /// Sum of other fields.
    Sum {
        terms: Vec<FieldSpec>,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldSpec {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            FieldSpec::Constant { value } => *value,
            FieldSpec::Sin { amplitude, omega } => amplitude * (omega * p[0]).sin(),
            FieldSpec::Cos { amplitude, omega } => amplitude * (omega * p[0]).cos(),
            FieldSpec::SinCos { amplitude, kx, ky } => amplitude * (kx * p[0]).sin() * (ky * p[1]).cos(),
            FieldSpec::Sum { terms } => terms.iter().map(|t| t.eval(p)).sum(),
        }
    }

    pub fn to_field(&self) -> ScalarField {
        let spec = self.clone();
        ScalarField::new(format!("{self:?}"), move |p| spec.eval(p))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Derivative orders per axis (`[n]` in 1D, `[nx, ny]` in 2D).
    pub orders: Vec<u8>,
    pub coeff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKindSpec {
    Value,
    Derivative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub point: Vec<f64>,
    pub kind: ConstraintKindSpec,
    /// Required for `derivative`.
    #[serde(default)]
    pub orders: Option<Vec<u8>>,
    pub target: f64,
    /// Defaults to the settings' `w_bc`.
    #[serde(default)]
    pub weight: Option<f64>,
}

/// A user-defined problem on an interval or rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    pub dimension: u8,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub operator: Vec<TermSpec>,
    #[serde(default)]
    pub constant_offset: f64,
    pub source: FieldSpec,
    #[serde(default)]
    pub exact: Option<FieldSpec>,
    pub constraints: Vec<ConstraintSpec>,
}

fn multi_index(orders: &[u8], dim: Dimension, key: &str) -> Result<MultiIndex> {
    let a = match (dim, orders) {
        (Dimension::One, [n]) => MultiIndex::new(*n, 0),
        (Dimension::Two, [nx, ny]) => MultiIndex::new(*nx, *ny),
        _ => return Err(Error::config(format!("`{key}` needs {} derivative orders", dim.as_usize()))),
    };
    a.map_err(|e| Error::config(format!("`{key}`: {e}")))
}

fn point(v: &[f64], dim: Dimension, key: &str) -> Result<[f64; 2]> {
    match (dim, v) {
        (Dimension::One, [x]) => Ok([*x, 0.0]),
        (Dimension::Two, [x, y]) => Ok([*x, *y]),
        _ => Err(Error::config(format!("`{key}` needs {} coordinates", dim.as_usize()))),
    }
}

impl CustomProblem {
    pub fn dim(&self) -> Result<Dimension> {
        match self.dimension {
            1 => Ok(Dimension::One),
            2 => Ok(Dimension::Two),
            d => Err(Error::config(format!("`problem.dimension` must be 1 or 2, got {d}"))),
        }
    }

    pub fn bounds(&self) -> Result<DomainBounds> {
        let dim = self.dim()?;
        let b = match dim {
            Dimension::One => match (self.lower.as_slice(), self.upper.as_slice()) {
                ([a], [b]) => DomainBounds::interval(*a, *b),
                _ => return Err(Error::config("`problem.lower`/`upper` need one entry in 1D")),
            },
            Dimension::Two => match (self.lower.as_slice(), self.upper.as_slice()) {
                ([a, b], [c, d]) => DomainBounds::rect([*a, *b], [*c, *d]),
                _ => return Err(Error::config("`problem.lower`/`upper` need two entries in 2D")),
            },
        };
        b.map_err(|e| Error::config(format!("`problem` bounds: {e}")))
    }

    pub fn to_spec(&self, w_bc: f64) -> Result<ProblemSpec> {
        let dim = self.dim()?;
        let terms = self
            .operator
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Ok(OperatorTerm::constant(
                    multi_index(&t.orders, dim, &format!("problem.operator[{i}].orders"))?,
                    t.coeff,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let operator = LinearOperator::with_offset(terms, self.constant_offset)
            .map_err(|e| Error::config(format!("`problem.operator`: {e}")))?;
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let key = format!("problem.constraints[{i}]");
                let kind = match c.kind {
                    ConstraintKindSpec::Value => ConstraintKind::Value,
                    ConstraintKindSpec::Derivative => {
                        let o =
                            c.orders.as_ref().ok_or_else(|| Error::config(format!("`{key}.orders` is required")))?;
                        ConstraintKind::Derivative(multi_index(o, dim, &format!("{key}.orders"))?)
                    }
                };
                Ok(BoundaryConstraint {
                    point: point(&c.point, dim, &format!("{key}.point"))?,
                    kind,
                    target: c.target,
                    weight: c.weight.unwrap_or(w_bc),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = ProblemSpec {
            dimension: dim,
            bounds: self.bounds()?,
            operator,
            source: self.source.to_field(),
            constraints,
            geometry: None,
            sdf_weighting: None,
        };
        spec.validate().map_err(|e| Error::config(format!("`problem`: {e}")))?;
        Ok(spec)
    }
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub case: Option<CaseId>,
    pub problem: Option<CustomProblem>,
    pub settings: SettingsPatch,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub w_range: Option<[f64; 2]>,
    pub validation_factor: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        if cfg.case.is_some() && cfg.problem.is_some() {
            return Err(Error::config("`case` and `problem` are mutually exclusive"));
        }
        Ok(cfg)
    }

    /// Settings for a built-in case: defaults overlaid with the file.
    pub fn case_settings(&self, id: CaseId, flags: &SettingsPatch) -> Result<CaseSettings> {
        let mut s = CaseSettings::defaults(id);
        self.settings.clone().merge(flags).apply(&mut s)?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let s = CaseSettings::defaults(CaseId::Tc5);
        let echo = serde_json::json!({ "case": "tc5", "settings": s });
        let cfg = ConfigFile::parse(&echo.to_string()).unwrap();
        assert_eq!(cfg.case_settings(CaseId::Tc5, &SettingsPatch::default()).unwrap(), s);
    }

    #[test]
    fn flags_override_file() {
        let cfg = ConfigFile::parse(r#"{"case": "tc1", "settings": {"points_per_partition": 50, "width_scale": 3.0}}"#)
            .unwrap();
        let flags = SettingsPatch { points_per_partition: Some(80), ..Default::default() };
        let s = cfg.case_settings(CaseId::Tc1, &flags).unwrap();
        assert_eq!(s.points_per_partition, 80);
        assert_eq!(s.width_scale, 3.0);
        assert_eq!(s.w_bc, 50.0);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ConfigFile::parse(r#"{"case": "tc1", "settings": {"bogus_key": 1}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("bogus_key")), "{err}");
    }

    #[test]
    fn lengths_and_logits_conflict() {
        let cfg = ConfigFile::parse(r#"{"settings": {"lengths": [0.5, 0.5], "logits": [0, 0]}}"#).unwrap();
        assert!(matches!(cfg.case_settings(CaseId::Tc1, &SettingsPatch::default()), Err(Error::Config(_))));
        let cfg = ConfigFile::parse(r#"{"settings": {"logits": [0, 1.0986122886681098]}}"#).unwrap();
        let s = cfg.case_settings(CaseId::Tc1, &SettingsPatch::default()).unwrap();
        assert!((s.lengths[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn flag_lengths_replace_file_logits() {
        let cfg = ConfigFile::parse(r#"{"settings": {"logits": [0, 1]}}"#).unwrap();
        let flags = SettingsPatch { lengths: Some(vec![0.3, 0.7]), ..Default::default() };
        assert_eq!(cfg.case_settings(CaseId::Tc1, &flags).unwrap().lengths, vec![0.3, 0.7]);
    }

    #[test]
    fn custom_problem_builds() {
        let text = r#"{
            "problem": {
                "dimension": 1, "lower": [0], "upper": [1],
                "operator": [{"orders": [1], "coeff": 1.0}],
                "source": {"kind": "cos", "omega": 3.0},
                "exact": {"kind": "sin", "amplitude": 0.3333333333333333, "omega": 3.0},
                "constraints": [{"point": [0], "kind": "value", "target": 0}]
            }
        }"#;
        let cfg = ConfigFile::parse(text).unwrap();
        let spec = cfg.problem.unwrap().to_spec(50.0).unwrap();
        assert_eq!(spec.constraints[0].weight, 50.0);
        assert!((spec.rhs([0.2, 0.0]) - 0.6f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn custom_problem_errors_name_keys() {
        let text = r#"{"problem": {"dimension": 1, "lower": [0], "upper": [1],
            "operator": [{"orders": [1, 0], "coeff": 1.0}],
            "source": {"kind": "constant", "value": 0},
            "constraints": [{"point": [0], "kind": "value", "target": 0}]}}"#;
        let err = ConfigFile::parse(text).unwrap().problem.unwrap().to_spec(1.0).unwrap_err();
        assert!(err.to_string().contains("problem.operator[0].orders"), "{err}");
    }
}
