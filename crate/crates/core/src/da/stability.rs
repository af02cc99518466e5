use super::Matching;
use crate::error::{Error, Result};
use crate::market::PreferenceProfile;

/// Every blocking pair `(m, w)` of `matching` under `profile`, sorted.
///
/// A pair blocks when `m` and `w` are not matched to each other and each
/// strictly prefers the other to their current partner; being unmatched is
/// worse than any partner.
pub fn check_stability(matching: &Matching, profile: &PreferenceProfile) -> Result<Vec<(u32, u32)>> {
    if matching.n_men() != profile.n_men() || matching.n_women() != profile.n_women() {
        return Err(Error::validation(format!(
            "matching is {}x{} but profile is {}x{}",
            matching.n_men(),
            matching.n_women(),
            profile.n_men(),
            profile.n_women()
        )));
    }
    // Re-run the bijection check: `Matching` may have been built in-crate.
    Matching::new(matching.wives().to_vec(), matching.husbands().to_vec())?;
    let mut blocking = Vec::new();
    for m in 0..profile.n_men() {
        let list = &profile.men_prefs()[m];
        let better = match matching.wife_of(m) {
            Some(w) => profile.man_rank_of(m, w as usize) as usize,
            None => list.len(),
        };
        for &w in &list[..better] {
            let wi = w as usize;
            let accepts = match matching.husband_of(wi) {
                Some(h) => profile.woman_rank_of(wi, m) < profile.woman_rank_of(wi, h as usize),
                None => true,
            };
            if accepts {
                blocking.push((m as u32, w));
            }
        }
    }
    blocking.sort_unstable();
    Ok(blocking)
}
