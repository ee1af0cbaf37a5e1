use crate::kg::EntityId;
use crate::{Error, Result};

/// Fraction of users whose held-out entity appears in the first `k` of their
/// ranking.
pub fn hit_rate_at_k(ranked: &[Vec<EntityId>], held_out: &[EntityId], k: usize) -> Result<f64> {
    check(ranked, held_out, k)?;
    let hits = ranked
        .iter()
        .zip(held_out)
        .filter(|(list, h)| list.iter().take(k).any(|e| e == *h))
        .count();
    Ok(hits as f64 / ranked.len() as f64)
}

/// `1 / log2(rank + 1)` for a held-out entity at 1-based `rank <= k`, else 0.
pub fn ndcg_at_k(ranked: &[EntityId], held_out: EntityId, k: usize) -> f64 {
    match ranked.iter().take(k).position(|&e| e == held_out) {
        Some(i) => 1.0 / ((i + 2) as f64).log2(),
        None => 0.0,
    }
}

/// Mean of [`ndcg_at_k`] over users.
pub fn mean_ndcg_at_k(ranked: &[Vec<EntityId>], held_out: &[EntityId], k: usize) -> Result<f64> {
    check(ranked, held_out, k)?;
    let total: f64 = ranked
        .iter()
        .zip(held_out)
        .map(|(list, &h)| ndcg_at_k(list, h, k))
        .sum();
    Ok(total / ranked.len() as f64)
}

fn check(ranked: &[Vec<EntityId>], held_out: &[EntityId], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if ranked.len() != held_out.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rankings for {} held-out entities",
            ranked.len(),
            held_out.len()
        )));
    }
    if ranked.is_empty() {
        return Err(Error::EmptyUserSet);
    }
    Ok(())
}
