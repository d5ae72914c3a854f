//! Published piecewise fluid solution for the five-station preset started at
//! `Q(0) = 150` per station with `r = 50000`, in queue units.

/// Published breakpoints `t₁..t₄`.
pub const BREAKPOINTS: [f64; 4] = [0.1826, 0.3189, 1.4, 1.4758];

/// Reference queue lengths `(Q_1, ..., Q_5)` at time `t`.
pub fn five_station_reference(t: f64) -> [f64; 5] {
    let [t1, t2, t3, t4] = BREAKPOINTS;
    let e = (-t).exp();
    let e14 = (1.4 - t).exp();
    let q1 = if t <= t3 {
        150.0 - 62.5 * t
    } else if t <= t4 {
        62.5 * e14
    } else {
        62.5 + 195.0 / 64.0 * e14 - 517.0 / 16.0 * e
    };
    let q23 = if t <= t2 {
        498.5 + 0.625 * t - 348.5 * e
    } else if t <= t3 {
        75.0 * t / 152.0 + 14955.0 / 38.0 - 7755.0 / 38.0 * e
    } else if t <= t4 {
        7500.0 / 19.0 - 75.0 / 152.0 * e14 - 7755.0 / 38.0 * e
    } else {
        375.0 + 585.0 / 32.0 * e14 - 1551.0 / 8.0 * e
    };
    let q4 = if t <= t1 {
        249.25 + 0.3125 * t - 99.25 * e
    } else if t <= t2 {
        997.0 / 7.0 + 5.0 / 28.0 * t + 29.0 * e
    } else if t <= t3 {
        4985.0 / 19.0 + 25.0 / 76.0 * t - 2585.0 / 19.0 * e
    } else if t <= t4 {
        5000.0 / 19.0 - 25.0 / 76.0 * e14 - 2585.0 / 19.0 * e
    } else {
        250.0 + 195.0 / 16.0 * e14 - 129.25 * e
    };
    let q5 = if t <= t1 {
        150.0 * e
    } else if t <= t2 {
        15.0 * t / 112.0 + 2991.0 / 28.0 + 87.0 / 4.0 * e
    } else if t <= t3 {
        14955.0 / 76.0 + 75.0 / 304.0 * t - 7755.0 / 76.0 * e
    } else if t <= t4 {
        3750.0 / 19.0 - 75.0 / 304.0 * e14 - 7755.0 / 76.0 * e
    } else {
        187.5 + 585.0 / 64.0 * e14 - 1551.0 / 16.0 * e
    };
    [q1, q23, q23, q4, q5]
}
