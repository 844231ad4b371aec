/// Learning rate `alpha_t = (H + 1) / (H + t)` for `t >= 1`.
#[inline]
pub fn alpha(h: usize, t: u64) -> f64 {
    (h as f64 + 1.0) / (h as f64 + t as f64)
}

/// The weights `alpha_t^i = alpha_i * prod_{j = i+1..t} (1 - alpha_j)` for
/// `i = 1..=t`, returned at index `i - 1`.
pub fn alpha_weights(h: usize, t: u64) -> Vec<f64> {
    let t = t as usize;
    let mut out = vec![0.0; t];
    let mut tail = 1.0;
    for i in (1..=t).rev() {
        out[i - 1] = alpha(h, i as u64) * tail;
        tail *= 1.0 - alpha(h, i as u64);
    }
    out
}

/// `sum_{t = i..=t_max} alpha_t^i`, accumulated forward in `t`.
pub fn alpha_tail_sum(h: usize, i: u64, t_max: u64) -> f64 {
    let mut w = alpha(h, i);
    let mut sum = 0.0;
    for t in i..=t_max {
        if t > i {
            w *= 1.0 - alpha(h, t);
        }
        sum += w;
    }
    sum
}
