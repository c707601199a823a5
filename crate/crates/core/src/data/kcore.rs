use std::collections::HashMap;

use super::record::InteractionRecord;

/// Repeatedly drops records of users and items with fewer than `k`
/// interactions until every survivor has at least `k` of each. Input order is
/// preserved among survivors.
pub fn k_core_prune(records: &[InteractionRecord], k: usize) -> Vec<InteractionRecord> {
    let mut alive = vec![true; records.len()];
    loop {
        let mut users: HashMap<&str, usize> = HashMap::new();
        let mut items: HashMap<&str, usize> = HashMap::new();
        for (r, _) in records.iter().zip(&alive).filter(|(_, &a)| a) {
            *users.entry(&r.user_id).or_default() += 1;
            *items.entry(&r.item_id).or_default() += 1;
        }
        let mut changed = false;
        for (r, a) in records.iter().zip(alive.iter_mut()) {
            if *a && (users[r.user_id.as_str()] < k || items[r.item_id.as_str()] < k) {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    records
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(r, _)| r.clone())
        .collect()
}
