//! Drives a labeling session in-process with a scripted annotator who sees
//! two groups of objects, then prints the learned 2-D layout.

use rckl_service::{NewSession, SessionSettings, SessionStore};

fn group(i: usize) -> usize {
    i % 2
}

fn main() -> rckl_service::Result<()> {
    let store = SessionStore::in_memory();
    let id = store.create(NewSession {
        objects: (0..10).map(|i| (format!("item-{i}"), None)).collect(),
        settings: SessionSettings {
            seed: 3,
            passes: 2,
            ..SessionSettings::default()
        },
    })?;

    for _ in 0..120 {
        let q = store.next_query(&id)?;
        let [x, y] = q.options;
        let chosen = if group(x) == group(q.head) { x } else { y };
        store.submit_answer(&id, q.query_id, chosen)?;
    }

    let stats = store.stats(&id)?;
    println!(
        "{} answers, training error {:.3}, {} eigensolves",
        stats.answers,
        stats.train_error_over_log.unwrap_or(f64::NAN),
        stats.projection.eig_computations
    );
    for p in store.embedding(&id, 2)?.points {
        println!("{:<8} group {}  ({:+.3}, {:+.3})", p.label, group(p.index), p.coords[0], p.coords[1]);
    }
    Ok(())
}
