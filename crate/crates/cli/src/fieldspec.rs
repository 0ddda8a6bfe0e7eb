//! Named test fields for the approximation subcommand, parseable either from
//! a short `name:arg` string or from a JSON file (`@path`).

use cuspidal_core::domain::DomainSpec;
use cuspidal_core::fields::{
    ConstField, CoordField, CuspAligned, CuspProfile, Field, MonomialField, TipBump,
};
use serde::{Deserialize, Serialize};

use crate::util::{read_file, validation, AppResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Const { value: f64 },
    Coord { axis: usize },
    Monomial { powers: Vec<u32> },
    CuspLinear,
    CuspLayer { order: u32 },
    Tip { b: f64, order: u32 },
}

impl FieldSpec {
    pub fn parse(s: &str) -> AppResult<FieldSpec> {
        if let Some(path) = s.strip_prefix('@') {
            let text = read_file(std::path::Path::new(path))?;
            return serde_json::from_str(&text).map_err(validation);
        }
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || {
            validation(format!(
                "unknown field `{s}`; expected const:<v>, coord:<axis>, monomial:<p1,p2,..>, \
                 cusp:linear, cusp:layer:<order>, tip:<b>:<order>, or @file.json"
            ))
        };
        match parts.as_slice() {
            ["const", v] => Ok(FieldSpec::Const {
                value: v.parse().map_err(|_| bad())?,
            }),
            ["coord", a] => Ok(FieldSpec::Coord {
                axis: a.parse().map_err(|_| bad())?,
            }),
            ["monomial", ps] => {
                let powers: Result<Vec<u32>, _> = ps.split(',').map(str::parse).collect();
                Ok(FieldSpec::Monomial {
                    powers: powers.map_err(|_| bad())?,
                })
            }
            ["cusp", "linear"] => Ok(FieldSpec::CuspLinear),
            ["cusp", "layer", o] => Ok(FieldSpec::CuspLayer {
                order: o.parse().map_err(|_| bad())?,
            }),
            ["tip", b, o] => Ok(FieldSpec::Tip {
                b: b.parse().map_err(|_| bad())?,
                order: o.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }

    pub fn build<'a>(&self, dom: &'a DomainSpec) -> AppResult<Box<dyn Field + 'a>> {
        let d = dom.dim;
        Ok(match self {
            FieldSpec::Const { value } => Box::new(ConstField {
                value: *value,
                dim: d,
            }),
            FieldSpec::Coord { axis } => {
                if *axis >= d {
                    return Err(validation(format!("axis {axis} out of range for dim {d}")));
                }
                Box::new(CoordField {
                    axis: *axis,
                    dim: d,
                })
            }
            FieldSpec::Monomial { powers } => {
                if powers.len() != d {
                    return Err(validation(format!("need {d} powers")));
                }
                Box::new(MonomialField {
                    powers: powers.clone(),
                })
            }
            FieldSpec::CuspLinear => Box::new(CuspAligned {
                dom,
                profile: CuspProfile::Linear,
            }),
            FieldSpec::CuspLayer { order } => Box::new(CuspAligned {
                dom,
                profile: CuspProfile::BoundaryLayer { order: *order },
            }),
            FieldSpec::Tip { b, order } => {
                let top = dom.psi_sup();
                if !(*b < top) {
                    return Err(validation(format!(
                        "tip threshold {b} above the graph top {top}"
                    )));
                }
                Box::new(TipBump {
                    b: *b,
                    top,
                    order: *order,
                    dim: d,
                })
            }
        })
    }
}
