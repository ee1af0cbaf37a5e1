//! Plain-text statistics report.

use std::fmt::Write;

use mindreader_core::dataset::{
    co_rating_histogram, coverage_report, long_tail_report, sentiment_distribution_by_kind, summary,
    top_entities_per_sentiment, EntityClass,
};
use mindreader_core::kg::degree_stats;

use crate::data::Dataset;
use crate::error::Result;

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

pub fn render_stats(data: &Dataset, top: usize) -> Result<String> {
    let g = &*data.graph;
    let store = &data.ratings;
    let mut out = String::new();
    let w = &mut out;

    let gs = degree_stats(g)?;
    let _ = writeln!(w, "Knowledge graph");
    let _ = writeln!(w, "  nodes              {}", gs.node_count);
    for (kind, n) in &gs.kind_counts {
        let _ = writeln!(w, "    {:<16} {n}", kind.as_str());
    }
    let _ = writeln!(w, "  edges              {}", gs.edge_count);
    let _ = writeln!(w, "  relations          {}", g.relations().len());
    let _ = writeln!(w, "  degree min         {}", gs.min_degree);
    let _ = writeln!(w, "  degree median      {}", gs.median_degree);
    let _ = writeln!(w, "  degree mean        {:.2}", gs.mean_degree);
    let _ = writeln!(w, "  degree max         {}", gs.max_degree);
    let _ = writeln!(w, "  components         {}", gs.component_count);

    let s = summary(store);
    let _ = writeln!(w, "\nRatings");
    let _ = writeln!(w, "  users              {}", s.users);
    let _ = writeln!(w, "  ratings            {}", s.ratings);
    let _ = writeln!(w, "  likes              {}", s.likes);
    let _ = writeln!(w, "  dislikes           {}", s.dislikes);
    let _ = writeln!(w, "  unknowns           {}", s.unknowns);
    let _ = writeln!(w, "  rated entities     {}", s.rated_entities);
    let _ = writeln!(w, "  ratings per user   {:.2}", s.mean_ratings_per_user);

    let _ = writeln!(w, "\nSentiment by entity kind (mean over users)");
    let _ = writeln!(w, "  {:<16} {:>8} {:>8} {:>8} {:>6}", "kind", "like", "dislike", "unknown", "users");
    for (kind, sh) in sentiment_distribution_by_kind(store, g) {
        let _ = writeln!(
            w,
            "  {:<16} {:>8} {:>8} {:>8} {:>6}",
            kind.as_str(),
            pct(sh.like),
            pct(sh.dislike),
            pct(sh.unknown),
            sh.sessions
        );
    }

    let _ = writeln!(w, "\nCoverage by entity kind");
    let _ = writeln!(w, "  {:<16} {:>8} {:>8} {:>12} {:>8}", "kind", "entities", "none", "unknown only", "binary");
    for (kind, c) in coverage_report(store, g) {
        let _ = writeln!(
            w,
            "  {:<16} {:>8} {:>8} {:>12} {:>8}",
            kind.as_str(),
            c.entities,
            pct(c.no_observation),
            pct(c.unknown_only),
            pct(c.binary)
        );
    }

    let tail = long_tail_report(store, g);
    let _ = writeln!(w, "\nLong tail ({} rated entities)", tail.ranked.len());
    for f in [0.01, 0.1, 0.2, 0.5] {
        let _ = writeln!(w, "  top {:>4} of entities hold {} of ratings", pct(f), pct(tail.share_at(f)));
    }
    let _ = writeln!(w, "  entities holding half the ratings: {}", tail.entities_for_share(0.5));

    for (label, class) in [("recommendable", EntityClass::Recommendable), ("descriptive", EntityClass::Descriptive)] {
        let hist = co_rating_histogram(store, class);
        let pairs: u64 = hist.values().sum();
        let _ = writeln!(w, "\nCo-rated {label} entities per user pair ({pairs} pairs share at least one)");
        let shown: Vec<String> = hist.iter().take(10).map(|(k, v)| format!("{k}:{v}")).collect();
        let _ = writeln!(w, "  {}", if shown.is_empty() { "none".into() } else { shown.join("  ") });
        if let Some((max, _)) = hist.iter().next_back() {
            let _ = writeln!(w, "  max shared         {max}");
        }
    }

    for (sentiment, list) in top_entities_per_sentiment(store, g, top) {
        let _ = writeln!(w, "\nMost frequent {sentiment}");
        for (e, n) in list {
            let ent = &g.entities()[e.index()];
            let _ = writeln!(w, "  {n:>6}  {}  {}", ent.uri, ent.name);
        }
    }
    Ok(out)
}
