/// SGD with heavy-ball momentum and L2 weight decay:
/// `v ← μ·v − lr·(g + λ·θ)`, `θ ← θ + v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Vec<f64>>,
}

/// One parameter group: its values, gradient and whether decay applies.
pub struct ParamGroup<'a> {
    pub values: &'a mut [f64],
    pub grad: &'a [f64],
    pub decay: bool,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    /// Groups must arrive in the same order and sizes on every call.
    pub fn step(&mut self, groups: Vec<ParamGroup<'_>>) {
        if self.velocity.is_empty() {
            self.velocity = groups.iter().map(|g| vec![0.0; g.values.len()]).collect();
        }
        assert_eq!(self.velocity.len(), groups.len(), "parameter groups changed between steps");
        for (group, vel) in groups.into_iter().zip(&mut self.velocity) {
            assert_eq!(group.values.len(), group.grad.len());
            let wd = if group.decay { self.weight_decay } else { 0.0 };
            for ((theta, g), v) in group.values.iter_mut().zip(group.grad).zip(vel.iter_mut()) {
                *v = self.momentum * *v - self.lr * (g + wd * *theta);
                *theta += *v;
            }
        }
    }
}
