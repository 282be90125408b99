//! Times one full-batch loss-and-gradient evaluation per architecture.
//!
//! Usage: `step_timing [problem] [mlp|kan|hybrid] [reps]`

use std::time::Instant;

use hpkm::kan::{Kan, KanSpec};
use hpkm::mlp::{Mlp, MlpSpec};
use hpkm::pinn::{CollocationSet, LossWeights, Objective, PinnObjective};
use hpkm::problems::ProblemKind;
use hpkm::{HpkmModel, Network};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kinds = match args.get(1) {
        Some(name) => vec![name.parse::<ProblemKind>().expect("problem name")],
        None => ProblemKind::ALL.to_vec(),
    };
    let only = args.get(2).cloned();
    let reps: usize = args.get(3).map_or(20, |r| r.parse().expect("repetitions"));
    for kind in kinds {
        let problem = kind.problem();
        let (mlp, kan) = match kind {
            ProblemKind::Poisson => (vec![1, 20, 20, 1], vec![1, 30, 30, 1]),
            _ => (vec![2, 20, 20, 20, 1], vec![2, 5, 5, 1]),
        };
        let mlp = Mlp::new(MlpSpec::new(mlp, 0)).unwrap();
        let kan = Kan::new(KanSpec::new(kan, 5, 3, problem.bounds.clone(), 0)).unwrap();
        let set = CollocationSet::sample(&problem, 2000, 500, 500).unwrap();
        let nets = [
            ("mlp", Network::Mlp(mlp.clone())),
            ("kan", Network::Kan(kan.clone())),
            ("hybrid", Network::Hybrid(HpkmModel::new(kan, mlp, 0.5).unwrap())),
        ];
        for (name, net) in nets {
            if only.as_deref().is_some_and(|o| o != name) {
                continue;
            }
            let objective = PinnObjective::new(&net, &problem, &set, LossWeights::default()).unwrap();
            let params = net.init().into_values();
            let mut grad = vec![0.0; params.len()];
            let start = Instant::now();
            for _ in 0..reps {
                grad.fill(0.0);
                objective.loss_and_grad(&params, &mut grad);
            }
            let per = start.elapsed().as_secs_f64() / reps as f64;
            println!("{:<20} {:<7} {:>6} params  {:>7.2} ms/step", kind.name(), name, params.len(), per * 1e3);
        }
    }
}
