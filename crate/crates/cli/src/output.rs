//! JSON and CSV renderings of states, tables and reports.

use quot_yangian::{CurveLetter, FockError, FockStateQ, ModuliParams, Q};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One term of a serialized state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub slots: Vec<(u32, String)>,
    pub coeff: String,
}

#[derive(Debug, Error)]
pub enum StateFormatError {
    #[error("bad coefficient `{0}`")]
    Coeff(String),
    #[error("bad letter `{0}`")]
    Letter(String),
    #[error("state carries open labels {0:?}; only capped states serialize")]
    OpenLabels(Vec<String>),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn state_to_json(state: &FockStateQ) -> Result<Vec<TermJson>, StateFormatError> {
    if !state.labels().is_empty() {
        return Err(StateFormatError::OpenLabels(state.labels().to_vec()));
    }
    Ok(state
        .terms()
        .map(|(v, _, c)| TermJson {
            slots: v.slots().iter().map(|(k, l)| (*k, l.to_string())).collect(),
            coeff: c.to_string(),
        })
        .collect())
}

pub fn state_from_json(terms: &[TermJson], params: &ModuliParams) -> Result<FockStateQ, StateFormatError> {
    let mut out = FockStateQ::zero(params.genus);
    for t in terms {
        let coeff: Q = t.coeff.trim().parse().map_err(|_| StateFormatError::Coeff(t.coeff.clone()))?;
        let mut raw = Vec::with_capacity(t.slots.len());
        for (k, l) in &t.slots {
            raw.push((*k, CurveLetter::parse(l).ok_or_else(|| StateFormatError::Letter(l.clone()))?));
        }
        let s = FockStateQ::from_slots(params.genus, params.rank, &raw, coeff)?;
        out = out.add(&s).expect("same genus, no labels");
    }
    Ok(out)
}

pub fn parse_state(text: &str, params: &ModuliParams) -> Result<FockStateQ, StateFormatError> {
    let terms: Vec<TermJson> = serde_json::from_str(text)?;
    state_from_json(&terms, params)
}

/// Top-level document shape shared by every command.
#[derive(Serialize)]
pub struct Document<'a, T: Serialize> {
    pub params: &'a ModuliParams,
    pub command: &'a str,
    pub results: T,
}

pub fn csv_rows(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let p = ModuliParams::new(2, 1, 0).unwrap();
        let s = FockStateQ::from_slots(1, 2, &[(0, CurveLetter::Alpha(1)), (1, CurveLetter::Point)], "-3/4".parse().unwrap())
            .unwrap()
            .add(&FockStateQ::vacuum(1))
            .unwrap();
        let text = serde_json::to_string(&state_to_json(&s).unwrap()).unwrap();
        assert_eq!(text, r#"[{"slots":[],"coeff":"1"},{"slots":[[1,"w"],[0,"al1"]],"coeff":"-3/4"}]"#);
        assert_eq!(parse_state(&text, &p).unwrap(), s);
    }

    #[test]
    fn rejects_garbage() {
        let p = ModuliParams::new(1, 0, 0).unwrap();
        assert!(matches!(parse_state(r#"[{"slots":[[0,"q"]],"coeff":"1"}]"#, &p), Err(StateFormatError::Letter(_))));
        assert!(matches!(parse_state(r#"[{"slots":[],"coeff":"x"}]"#, &p), Err(StateFormatError::Coeff(_))));
        assert!(matches!(parse_state(r#"[{"slots":[[3,"1"]],"coeff":"1"}]"#, &p), Err(StateFormatError::Fock(_))));
    }
}
