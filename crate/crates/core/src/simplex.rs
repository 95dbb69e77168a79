//! Derivative-free Nelder–Mead minimization.

#[derive(Clone, Debug)]
pub struct SimplexSettings {
    pub max_evaluations: usize,
    /// Stop once the largest vertex-to-best distance falls below this.
    pub min_diameter: f64,
    /// Offset of the initial vertices along each coordinate.
    pub initial_step: f64,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        SimplexSettings {
            max_evaluations: 500,
            min_diameter: 1e-4,
            initial_step: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn diameter(vertices: &[Vec<f64>]) -> f64 {
    let best = &vertices[0];
    vertices[1..]
        .iter()
        .map(|v| {
            v.iter()
                .zip(best)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Minimizes `f` starting from `x0`. Non-finite values count as `+∞`.
///
/// `f0`, when given, is reused as the value at `x0`. The returned point is
/// the best one evaluated, so it is never worse than `x0`.
pub fn minimize<F>(
    mut f: F,
    x0: &[f64],
    f0: Option<f64>,
    settings: &SimplexSettings,
) -> SimplexOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut vertices = vec![x0.to_vec()];
    let mut values = vec![match f0 {
        Some(v) => v,
        None => eval(x0, &mut evaluations),
    }];
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += settings.initial_step;
        values.push(eval(&x, &mut evaluations));
        vertices.push(x);
    }

    let mut converged = false;
    loop {
        // stable sort keeps the incumbent first among ties
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if diameter(&vertices) < settings.min_diameter {
            converged = true;
            break;
        }
        if evaluations >= settings.max_evaluations {
            break;
        }

        let worst = dim;
        let centroid: Vec<f64> = (0..dim)
            .map(|j| vertices[..worst].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&vertices[worst])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                vertices[worst] = expanded;
                values[worst] = fe;
            } else {
                vertices[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[worst - 1] {
            vertices[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[worst] {
            let x = along(-0.5);
            let v = eval(&x, &mut evaluations);
            (x, v)
        } else {
            let x = along(0.5);
            let v = eval(&x, &mut evaluations);
            (x, v)
        };
        if fc < values[worst].min(fr) {
            vertices[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=dim {
            let x: Vec<f64> = vertices[0]
                .iter()
                .zip(&vertices[i])
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            values[i] = eval(&x, &mut evaluations);
            vertices[i] = x;
        }
    }

    SimplexOutcome {
        x: vertices[0].clone(),
        value: values[0],
        evaluations,
        converged,
    }
}
