//! Integer microsecond clock helpers.
//!
//! Components expose times in seconds (`f64`) but keep their own deadlines in
//! integer microseconds so that phase arithmetic never accumulates rounding.

pub type Micros = i64;

pub const MICROS_PER_SEC: i64 = 1_000_000;

pub fn to_micros(seconds: f64) -> Micros {
    (seconds * 1e6).round() as Micros
}

pub fn from_micros(us: Micros) -> f64 {
    us as f64 / 1e6
}

pub fn ms_to_micros(ms: f64) -> Micros {
    (ms * 1e3).round() as Micros
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for us in [0, 1, 999_999, 3_200_000, 480_000_000] {
            assert_eq!(to_micros(from_micros(us)), us);
        }
        assert_eq!(ms_to_micros(250.0), 250_000);
    }
}
