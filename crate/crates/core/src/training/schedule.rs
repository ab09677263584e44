use crate::error::{Error, Result};

/// Number of warmup steps: `warmup_fraction * total_steps`, rounded.
pub fn warmup_steps(total_steps: u64, warmup_fraction: f64) -> u64 {
    (warmup_fraction * total_steps as f64).round() as u64
}

/// Linear warmup from 0 to `base_lr`, then linear decay back to 0 at `total_steps`.
pub fn lr_schedule(step: u64, total_steps: u64, base_lr: f64, warmup_fraction: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::Config("total_steps must be positive".into()));
    }
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::Config(format!(
            "warmup_fraction {warmup_fraction} outside [0, 1)"
        )));
    }
    if step > total_steps {
        return Err(Error::Config(format!(
            "step {step} beyond total_steps {total_steps}"
        )));
    }
    let warmup = warmup_steps(total_steps, warmup_fraction);
    if step == total_steps {
        return Ok(0.0);
    }
    if step < warmup {
        return Ok(base_lr * (step as f64 / warmup as f64));
    }
    Ok(base_lr * ((total_steps - step) as f64 / (total_steps - warmup) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(lr_schedule(0, 1000, 1.0, 0.1).unwrap(), 0.0);
        assert_eq!(lr_schedule(1000, 1000, 1.0, 0.1).unwrap(), 0.0);
        assert_eq!(lr_schedule(0, 10, 2.0, 0.0).unwrap(), 2.0);
        assert!(lr_schedule(0, 0, 1.0, 0.1).is_err());
        assert!(lr_schedule(11, 10, 1.0, 0.1).is_err());
        // warmup rounds up to the whole run
        assert_eq!(lr_schedule(1, 1, 1.0, 0.9).unwrap(), 0.0);
    }
}
