/// Adam with the AMSGrad correction: the step is scaled by the running
/// maximum of the second-moment estimate instead of the estimate itself.
#[derive(Debug, Clone)]
pub struct AmsGrad {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
    v_max: Vec<f64>,
}

impl AmsGrad {
    pub fn new(n_params: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AmsGrad {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            v_max: vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let lr_t = self.learning_rate * (1.0 - self.beta2.powi(self.t)).sqrt() / (1.0 - self.beta1.powi(self.t));
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            self.v_max[i] = self.v_max[i].max(self.v[i]);
            params[i] -= lr_t * self.m[i] / (self.v_max[i].sqrt() + self.epsilon);
        }
    }
}
