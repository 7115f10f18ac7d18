//! Exponential smoothing of vector-valued series.

/// Simple exponential smoothing: `level <- a*x + (1-a)*level`.
#[derive(Clone, Debug)]
pub struct ExpSmoother {
    alpha: f64,
    level: Option<Vec<f64>>,
}

impl ExpSmoother {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, level: None }
    }

    /// The first observation initialises the level.
    pub fn update(&mut self, x: &[f64]) {
        match &mut self.level {
            None => self.level = Some(x.to_vec()),
            Some(level) => {
                for (l, v) in level.iter_mut().zip(x) {
                    *l = self.alpha * v + (1.0 - self.alpha) * *l;
                }
            }
        }
    }

    pub fn level(&self) -> Option<&[f64]> {
        self.level.as_deref()
    }

    pub fn reset(&mut self) {
        self.level = None;
    }
}

/// Holt's linear method (level plus trend), one-step-ahead forecasts.
#[derive(Clone, Debug)]
pub struct HoltSmoother {
    alpha: f64,
    beta: f64,
    level: Vec<f64>,
    trend: Vec<f64>,
    initialised: bool,
}

impl HoltSmoother {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, level: Vec::new(), trend: Vec::new(), initialised: false }
    }

    pub fn update(&mut self, x: &[f64]) {
        if !self.initialised {
            self.level = x.to_vec();
            self.trend = vec![0.0; x.len()];
            self.initialised = true;
            return;
        }
        for i in 0..x.len() {
            let prev = self.level[i];
            let level = self.alpha * x[i] + (1.0 - self.alpha) * (prev + self.trend[i]);
            self.trend[i] = self.beta * (level - prev) + (1.0 - self.beta) * self.trend[i];
            self.level[i] = level;
        }
    }

    pub fn forecast(&self) -> Option<Vec<f64>> {
        self.initialised.then(|| self.level.iter().zip(&self.trend).map(|(l, t)| l + t).collect())
    }
}
