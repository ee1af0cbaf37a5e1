#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use mindreader_core::interview::{InterviewSession, Phase};
use mindreader_core::kg::{EntityKind, KnowledgeGraph};
use mindreader_core::sampling::{MovieMeta, Popularity};
use rand::Rng;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Stationary vector of the damped walk with teleport distribution `t`.
/// Out-links are weighted by multiplicity; dangling rows jump uniformly.
pub fn pagerank_oracle(n: usize, edges: &[(usize, usize)], d: f64, t: &[f64]) -> Vec<f64> {
    let mut m = vec![vec![0.0; n]; n];
    let mut out = vec![0.0; n];
    for &(u, _) in edges {
        out[u] += 1.0;
    }
    for &(u, v) in edges {
        m[u][v] += 1.0 / out[u];
    }
    for u in 0..n {
        if out[u] == 0.0 {
            m[u] = vec![1.0 / n as f64; n];
        }
    }
    // (I - d M^T) x = (1 - d) t
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(i == j) - d * m[j][i]).collect())
        .collect();
    let b: Vec<f64> = t.iter().map(|x| (1.0 - d) * x).collect();
    let x = solve_dense(a, b);
    let s: f64 = x.iter().sum();
    x.into_iter().map(|v| v / s).collect()
}

pub fn random_edges<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Graph with entities `n0..` of kind Person and the given directed edges.
pub fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> KnowledgeGraph {
    let mut b = KnowledgeGraph::builder();
    let ids: Vec<_> = (0..n)
        .map(|i| b.entity(&format!("n{i}"), "", EntityKind::Person).unwrap())
        .collect();
    for &(u, v) in edges {
        b.edge(ids[u], "LINKS", ids[v]).unwrap();
    }
    b.build(false).unwrap()
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Relative error of an analytic gradient against a numeric one.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
        + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` around `x`.
pub fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Movies linked to genres and people, with popularity for every movie.
pub fn random_interview_graph<R: Rng>(rng: &mut R) -> (Arc<KnowledgeGraph>, Popularity) {
    let mut b = KnowledgeGraph::builder();
    let genres: Vec<_> = (0..rng.random_range(2..7))
        .map(|i| b.entity(&format!("g{i}"), "", EntityKind::Genre).unwrap())
        .collect();
    let people: Vec<_> = (0..rng.random_range(3..16))
        .map(|i| b.entity(&format!("p{i}"), "", EntityKind::Person).unwrap())
        .collect();
    let mut metas = Vec::new();
    for i in 0..rng.random_range(9..50) {
        let m = b.entity(&format!("m{i:02}"), "", EntityKind::Movie).unwrap();
        b.edge(m, "HAS_GENRE", genres[rng.random_range(0..genres.len())]).unwrap();
        let mut cast = BTreeSet::new();
        for _ in 0..rng.random_range(1..4) {
            cast.insert(people[rng.random_range(0..people.len())]);
        }
        for p in cast {
            b.edge(m, "STARRING", p).unwrap();
        }
        metas.push(MovieMeta {
            entity: m,
            external_rating_count: rng.random_range(1..1000),
            release_year: rng.random_range(1950..2020),
        });
    }
    (Arc::new(b.build(false).unwrap()), Popularity::new(metas))
}

/// Checks a finished interview: 9-entity batches before the final lists, at
/// most 9 per final list, no entity asked twice, phases never going back, and
/// at least 30 binary answers before the final lists.
pub fn check_interview(session: &InterviewSession) -> Result<(), String> {
    if session.phase != Phase::Done {
        return Err(format!("ended in {:?}", session.phase));
    }
    let mut seen = BTreeSet::new();
    let mut phase = Phase::Initial;
    let mut binary = 0usize;
    for batch in &session.transcript {
        if batch.phase < phase {
            return Err(format!("phase went from {phase:?} back to {:?}", batch.phase));
        }
        phase = batch.phase;
        if batch.phase == Phase::Recommendation {
            if binary < 30 {
                return Err(format!("final lists after {binary} binary answers"));
            }
            let lists = session.final_lists.as_ref().ok_or("no final lists")?;
            for l in [&lists.predicted_liked, &lists.predicted_disliked, &lists.extras] {
                if l.len() > 9 {
                    return Err(format!("final list of {}", l.len()));
                }
            }
        } else if batch.answers.len() != 9 {
            return Err(format!("batch {} has {} entities", batch.batch_number, batch.answers.len()));
        }
        for &(id, s) in &batch.answers {
            if !seen.insert(id) {
                return Err(format!("entity {id} asked twice"));
            }
            binary += s.is_binary() as usize;
        }
    }
    if binary != session.binary_count() || seen != session.asked {
        return Err("transcript disagrees with session state".into());
    }
    let reached = session.transcript.iter().any(|b| b.phase == Phase::Recommendation);
    if !reached && !session.truncated {
        return Err("ended without final lists or truncation".into());
    }
    Ok(())
}
