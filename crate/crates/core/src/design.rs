//! Design proposals and the final-answer JSON exchanged with agents.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::ParamMap;

/// Geometric parameters plus a material choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProposal {
    pub params: ParamMap,
    pub material: String,
}

/// The object an agent submits at the end of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalDesign {
    pub category: String,
    pub material: String,
    pub parameters: ParamMap,
}

impl FinalDesign {
    pub fn new(category: &str, design: &DesignProposal) -> Self {
        Self {
            category: category.to_string(),
            material: design.material.clone(),
            parameters: design.params.clone(),
        }
    }

    pub fn proposal(&self) -> DesignProposal {
        DesignProposal {
            params: self.parameters.clone(),
            material: self.material.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    /// Same category and material, same parameter names, and every value
    /// within `rel_tol` relative difference.
    pub fn consistent_with(&self, category: &str, design: &DesignProposal, rel_tol: f64) -> bool {
        self.category == category
            && self.material == design.material
            && self.parameters.len() == design.params.len()
            && self.parameters.iter().all(|(name, &v)| {
                design
                    .params
                    .get(name)
                    .is_some_and(|&w| (v - w).abs() <= rel_tol * v.abs().max(w.abs()))
            })
    }
}

/// First balanced `{...}` region of `text` that parses as a JSON object.
///
/// Candidates are tried in order of their opening brace; braces inside JSON
/// string literals do not count toward balance.
pub fn extract_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    let bytes = text.as_bytes();
    for (start, _) in text.match_indices('{') {
        let Some(end) = balanced_end(&bytes[start..]) else {
            continue;
        };
        if let Ok(Value::Object(obj)) = serde_json::from_str(&text[start..start + end]) {
            return Some(obj);
        }
    }
    None
}

fn balanced_end(bytes: &[u8]) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts the first JSON object from `text` and reads it as a
/// [`FinalDesign`]. Objects lacking any of the three fields do not count.
pub fn parse_final(text: &str) -> Option<FinalDesign> {
    let obj = extract_json_object(text)?;
    serde_json::from_value(Value::Object(obj)).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design() -> DesignProposal {
        DesignProposal {
            params: ParamMap::from([("length".to_string(), 100.0), ("thickness".to_string(), 6.5)]),
            material: "Stainless Steel 304".into(),
        }
    }

    #[test]
    fn plain_object_parses() {
        let text = r#"{"category":"flat_plate","material":"Stainless Steel 304","parameters":{"length":100,"thickness":6.5}}"#;
        let f = parse_final(text).unwrap();
        assert_eq!(f.category, "flat_plate");
        assert_eq!(f.parameters["thickness"], 6.5);
        assert!(f.consistent_with("flat_plate", &design(), 1e-6));
    }

    #[test]
    fn object_inside_prose() {
        let text = "Done. Final answer:\n```json\n{\"category\": \"flat_plate\", \"material\": \"Stainless Steel 304\", \
                    \"parameters\": {\"length\": 100.0, \"thickness\": 6.5}}\n```\nThanks {not json}";
        assert!(parse_final(text).is_some());
    }

    #[test]
    fn skips_unparsable_candidates() {
        let text = r#"{oops} then {"category":"a","material":"b","parameters":{}}"#;
        assert_eq!(parse_final(text).unwrap().category, "a");
        let nested = r#"{"wrapper": 1, "x": {"category":"a","material":"b","parameters":{}}"#;
        // outer brace never closes; the inner object is the first balanced one
        assert_eq!(parse_final(nested).unwrap().material, "b");
    }

    #[test]
    fn braces_in_strings_do_not_count() {
        let text = r#"{"category":"a}","material":"{b","parameters":{"t":1}}"#;
        let f = parse_final(text).unwrap();
        assert_eq!((f.category.as_str(), f.material.as_str()), ("a}", "{b"));
    }

    #[test]
    fn no_object_means_no_parse() {
        assert!(parse_final("I could not find a design.").is_none());
        assert!(parse_final("").is_none());
        assert!(parse_final(r#"{"category":"a"}"#).is_none());
        assert!(parse_final("[1, 2, 3]").is_none());
    }

    #[test]
    fn consistency_tolerance() {
        let d = design();
        let mut f = FinalDesign::new("flat_plate", &d);
        assert!(f.consistent_with("flat_plate", &d, 1e-6));
        assert!(!f.consistent_with("l_bracket", &d, 1e-6));
        f.parameters["thickness"] = 6.5 * (1.0 + 5e-7);
        assert!(f.consistent_with("flat_plate", &d, 1e-6));
        f.parameters["thickness"] = 7.0;
        assert!(!f.consistent_with("flat_plate", &d, 1e-6));
        let mut g = FinalDesign::new("flat_plate", &d);
        g.parameters.shift_remove("length");
        assert!(!g.consistent_with("flat_plate", &d, 1e-6));
        g.parameters.insert("width".into(), 100.0);
        assert!(!g.consistent_with("flat_plate", &d, 1e-6));
    }

    #[test]
    fn round_trip_through_text() {
        let f = FinalDesign::new("flat_plate", &design());
        assert_eq!(parse_final(&f.to_json()).unwrap(), f);
    }
}
