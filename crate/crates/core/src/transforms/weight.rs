use serde::{Deserialize, Serialize};

use super::field::{determinant, CMat, FieldPoint, MatrixField, MatrixFieldConfig, SINGULAR_DET};
use crate::error::{GeoError, Result};

/// Matrix attenuation `A(z, x)`; a Higgs field when it depends on `x` only.
#[derive(Clone, Debug)]
pub struct Attenuation {
    pub field: MatrixField,
}

impl Attenuation {
    pub fn new(field: MatrixField) -> Self {
        Attenuation { field }
    }

    pub fn zero(n: usize) -> Self {
        Attenuation::new(MatrixField::Zero(n))
    }

    pub fn constant(m: CMat) -> Self {
        Attenuation::new(MatrixField::Constant(m))
    }

    pub fn higgs(field: MatrixField) -> Result<Self> {
        if !field.is_position_only() {
            return Err(GeoError::Hypothesis("Higgs field must depend on position only".into()));
        }
        Ok(Attenuation { field })
    }

    pub fn size(&self) -> usize {
        self.field.size()
    }

    pub fn is_higgs(&self) -> bool {
        self.field.is_position_only()
    }

    pub fn eval(&self, p: &FieldPoint) -> CMat {
        self.field.eval(p)
    }
}

/// Invertible matrix weight `W(z, x)`.
#[derive(Clone, Debug)]
pub enum MatrixWeight {
    /// Closed-form or identity weight. Expression entries may use `v1, v2`
    /// to lift a weight defined on the unit tangent bundle.
    Field(MatrixField),
    /// `W = W_A⁻¹`, the inverse transport solution for `A`; the weighted
    /// transform then equals the attenuated transform `I_A`.
    Transport(Attenuation),
}

impl MatrixWeight {
    pub fn identity(n: usize) -> Self {
        MatrixWeight::Field(MatrixField::Identity(n))
    }

    pub fn size(&self) -> usize {
        match self {
            MatrixWeight::Field(f) => f.size(),
            MatrixWeight::Transport(a) => a.size(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, MatrixWeight::Field(MatrixField::Identity(_)))
    }

    /// Real-analytic in `(β, α, x)`; transport weights inherit analyticity
    /// from their attenuation.
    pub fn is_analytic(&self) -> bool {
        match self {
            MatrixWeight::Field(f) => f.is_analytic(),
            MatrixWeight::Transport(a) => a.field.is_analytic(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MatrixWeight::Field(MatrixField::Identity(_)) => "identity",
            MatrixWeight::Field(_) => "expr",
            MatrixWeight::Transport(_) => "transport",
        }
    }

    /// Evaluates a closed-form weight and checks invertibility.
    pub fn eval_checked(field: &MatrixField, p: &FieldPoint) -> Result<CMat> {
        let w = field.eval(p);
        if !matches!(field, MatrixField::Identity(_)) {
            let det = determinant(&w).norm();
            if !(det >= SINGULAR_DET) {
                return Err(GeoError::WeightSingular { det });
            }
        }
        Ok(w)
    }
}

/// JSON form of a weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightConfig {
    Identity { n: usize },
    Expr { n: usize, entries: Vec<Vec<String>> },
    Exp { n: usize, entries: Vec<Vec<String>> },
    Transport { attenuation: MatrixFieldConfig },
}

impl WeightConfig {
    pub fn build(&self) -> Result<MatrixWeight> {
        let field = match self {
            WeightConfig::Identity { n } => MatrixFieldConfig::Identity { n: *n },
            WeightConfig::Expr { n, entries } => MatrixFieldConfig::Expr {
                n: *n,
                entries: entries.clone(),
            },
            WeightConfig::Exp { n, entries } => MatrixFieldConfig::Exp {
                n: *n,
                entries: entries.clone(),
            },
            WeightConfig::Transport { attenuation } => return Ok(MatrixWeight::Transport(Attenuation::new(attenuation.build()?))),
        };
        Ok(MatrixWeight::Field(field.build()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn singular_expression_weight_is_reported() {
        let w: WeightConfig = serde_json::from_str(r#"{"kind": "expr", "n": 2, "entries": [["x1", "0"], ["0", "1"]]}"#).unwrap();
        let MatrixWeight::Field(f) = w.build().unwrap() else { panic!() };
        assert!(MatrixWeight::eval_checked(&f, &FieldPoint::at(Point::new(0.5, 0.0))).is_ok());
        let err = MatrixWeight::eval_checked(&f, &FieldPoint::at(Point::new(0.0, 0.3))).unwrap_err();
        assert!(matches!(err, GeoError::WeightSingular { .. }));
    }

    #[test]
    fn higgs_rejects_direction_dependence() {
        let f = MatrixFieldConfig::Expr {
            n: 1,
            entries: vec![vec!["alpha".into()]],
        }
        .build()
        .unwrap();
        assert!(Attenuation::higgs(f.clone()).is_err());
        assert!(!Attenuation::new(f).is_higgs());
    }

    #[test]
    fn weight_kinds() {
        assert_eq!(MatrixWeight::identity(3).kind(), "identity");
        let t: WeightConfig = serde_json::from_str(r#"{"kind": "transport", "attenuation": {"kind": "zero", "n": 2}}"#).unwrap();
        let w = t.build().unwrap();
        assert_eq!((w.kind(), w.size()), ("transport", 2));
        assert!(w.is_analytic());
    }
}
