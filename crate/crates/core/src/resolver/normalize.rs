use super::ResolveError;

const UNITS: &[&str] = &[
    "mg", "mcg", "ug", "g", "gm", "kg", "ml", "l", "%", "unit", "units", "u", "iu", "meq", "mmol", "mol", "mcl",
    "hr", "h", "mg/ml", "mcg/ml", "mg/kg", "units/ml", "meq/l", "ml/hr", "mcg/hr", "mg/hr",
];

const ROUTES: &[&str] = &[
    "iv", "po", "oral", "im", "sc", "sq", "subq", "subcut", "sl", "pr", "ng", "inh", "ivpb", "ivp", "neb", "topical", "td",
    "intravenous", "ophth", "nasal", "rectal",
];

const FORMS: &[&str] = &[
    "tab", "tabs", "tablet", "tablets", "cap", "caps", "capsule", "capsules", "soln", "solution", "susp", "suspension",
    "inj", "injection", "vial", "bag", "syringe", "cream", "ointment", "patch", "elixir", "syrup", "liquid", "powder",
    "premix", "ec", "er", "sr", "xl", "dr", "ud", "drip", "bolus", "supp", "suppository", "chewable", "gel", "spray",
];

fn is_dose(token: &str) -> bool {
    let rest = token.trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ',' || c == '/' || c == '-');
    // a bare unit is a dose token too ("500 mg")
    rest.is_empty() || UNITS.contains(&rest)
}

/// Lowercases a drug name and strips strengths, units, routes, dosage
/// forms and parenthesised or bracketed qualifiers.
pub fn normalize_name(raw: &str) -> Result<String, ResolveError> {
    let lower = raw.to_lowercase();
    let mut stripped = String::with_capacity(lower.len());
    let mut depth = 0usize;
    for c in lower.chars() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            _ if depth == 0 => stripped.push(c),
            _ => {}
        }
    }
    let tokens: Vec<&str> = stripped
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .filter(|t| !is_dose(t) && !ROUTES.contains(t) && !FORMS.contains(t))
        .collect();
    if tokens.is_empty() {
        return Err(ResolveError::EmptyAfterNormalization(raw.to_string()));
    }
    Ok(tokens.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_qualifiers() {
        let n = |s: &str| normalize_name(s).unwrap();
        assert_eq!(n("Acetaminophen 325mg Tab"), "acetaminophen");
        assert_eq!(n("  HEPARIN (Porcine) "), "heparin");
        assert_eq!(n("Sodium Chloride 0.9%  Flush"), "sodium chloride flush");
        assert_eq!(n("Insulin 100 units/ml SC"), "insulin");
        assert_eq!(n("Vancomycin 1 g IV [premixed]"), "vancomycin");
        assert_eq!(n("Potassium Chloride 40 mEq PO"), "potassium chloride");
        assert_eq!(n("5-Fluorouracil"), "5-fluorouracil");
    }

    #[test]
    fn empty_after_stripping() {
        assert!(matches!(normalize_name("500 mg"), Err(ResolveError::EmptyAfterNormalization(_))));
        assert!(normalize_name("   ").is_err());
        assert!(normalize_name("(brand)").is_err());
    }
}
