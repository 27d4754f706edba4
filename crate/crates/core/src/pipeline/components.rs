use crate::maps::LabelMask;

/// Relabels as background every 4-connected foreground component with fewer
/// than `min_size` pixels.
pub fn filter_small_components(mask: &LabelMask, min_size: usize) -> LabelMask {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let fg = mask.as_slice();
    let mut out = fg.to_vec();
    let mut seen = vec![false; fg.len()];
    let mut component = Vec::new();
    let mut stack = Vec::new();
    for start in 0..fg.len() {
        if !fg[start] || seen[start] {
            continue;
        }
        component.clear();
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if fg[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if component.len() < min_size {
            for &i in &component {
                out[i] = false;
            }
        }
    }
    LabelMask::new(mask.width(), mask.height(), out).expect("same dimensions")
}
