/// Logistic sigmoid `1 / (1 + e^-x)`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        // same value, no overflow of e^-x for very negative x
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hyperbolic tangent `(e^x - e^-x) / (e^x + e^-x)`.
#[inline]
pub fn tanh_act(x: f64) -> f64 {
    x.tanh()
}
