//! Raw log to leave-one-out split: positive filtering, k-core pruning,
//! sequence building and the split itself.
//!
//! ```text
//! cargo run --example data_pipeline
//! ```

use pdmrec::data::{
    build_sequences, filter_positive, k_core_prune, leave_one_out_split, FilterRule,
    InteractionRecord,
};

fn main() -> pdmrec::Result<()> {
    // A hand-written log: watch time, loop ratio and flags decide positivity.
    let mut log = Vec::new();
    for u in 0..6 {
        for (t, item) in ["a", "b", "c", "d", "e", "f"].iter().enumerate() {
            let r = InteractionRecord::new(format!("user{u}"), *item, (10 * t + u) as i64);
            let r = match (u + t) % 4 {
                0 => r.with_watch_time(60.0),
                1 => r.with_loop_times(1.5),
                2 => r.with_flag("like"),
                _ => r.with_watch_time(5.0),
            };
            log.push(r);
        }
    }
    log.push(InteractionRecord::new("user6", "z", 0).with_flag("share"));

    let rule = FilterRule::wechat();
    let positive = filter_positive(&log, &rule);
    println!("{} records, {} positive", log.len(), positive.len());

    let pruned = k_core_prune(&positive, 3);
    println!("3-core keeps {} records", pruned.len());

    let (sequences, items) = build_sequences(&pruned);
    println!("{} users over {} items", sequences.len(), items.len());
    let split = leave_one_out_split(&sequences, items);
    for u in &split.users {
        println!(
            "{}: train {:?} valid {} test {}",
            u.user_id, u.train, u.valid, u.test
        );
    }
    println!("content hash {}", split.content_hash());
    Ok(())
}
