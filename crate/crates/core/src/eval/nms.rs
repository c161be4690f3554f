use crate::geom::BBox;

/// Greedy non-maximum suppression over `(box, score)` pairs from one image and
/// category: keep the best remaining box, drop every other box with IoU of at
/// least `iou_thresh` against it, repeat. Returns kept indices, best first; equal
/// scores keep input order.
pub fn greedy_nms(items: &[(BBox, f64)], iou_thresh: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].1.total_cmp(&items[a].1).then(a.cmp(&b)));
    let mut suppressed = vec![false; items.len()];
    let mut kept = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(i);
        for &j in &order[rank + 1..] {
            if !suppressed[j] && items[i].0.iou(&items[j].0) >= iou_thresh {
                suppressed[j] = true;
            }
        }
    }
    kept
}
