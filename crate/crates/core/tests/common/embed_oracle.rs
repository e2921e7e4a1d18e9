//! Independent re-derivation of the feature-hashing embedder: plain loops,
//! f64 only, written from the algorithm description.

pub const SEED: u64 = 0x5eed_cafe_f00d_d00d;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(1099511628211);
    }
    h
}

pub fn embed(text: &str, dims: usize) -> Vec<f64> {
    let lower = text.to_lowercase();
    let mut out = vec![0.0; dims];
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut Vec<f64>| {
        if token.is_empty() {
            return;
        }
        let mut bytes = SEED.to_le_bytes().to_vec();
        bytes.extend_from_slice(token.as_bytes());
        let h = fnv1a(&bytes);
        let sign = if h & (1 << 63) != 0 { -1.0 } else { 1.0 };
        out[(h % dims as u64) as usize] += sign;
        token.clear();
    };
    for c in lower.chars() {
        if c.is_alphanumeric() {
            token.push(c);
        } else {
            flush(&mut token, &mut out);
        }
    }
    flush(&mut token, &mut out);
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut out {
            *x /= norm;
        }
    }
    out
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
