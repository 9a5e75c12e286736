mod common;

use common::{constructed_oracle, constructed_rnn};
use intrinsic_affinity::affinity::Trait;
use intrinsic_affinity::statespace::{
    converge_trajectory, estimate_attractors, extract_trajectory, synth_dataset, train_personality_rnn, RnnTrainConfig,
};

fn l2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn oracle_points_are_interior_and_distinct() {
    let pts = constructed_oracle();
    assert!(pts.iter().flatten().all(|v| v.abs() < 0.95));
    for i in 0..5 {
        for j in i + 1..5 {
            assert!(l2(&pts[i], &pts[j]) > 0.3);
        }
    }
}

#[test]
fn estimated_attractors_match_constructed_fixed_points() {
    let (rnn, histories) = constructed_rnn();
    let oracle = constructed_oracle();
    let dense = estimate_attractors(&rnn, 1000).unwrap();
    let corners = estimate_attractors(&rnn, 8).unwrap();
    for t in Trait::ALL {
        let j = t.index();
        let est = dense.get(t).location;
        assert!(l2(&est, &oracle[j]) < 1e-9, "{t}: {est:?} vs {:?}", oracle[j]);
        assert!(l2(&est, &corners.get(t).location) < 1e-9);
        let terminal = converge_trajectory(&rnn, &histories[j], 100).unwrap().terminal();
        assert!(l2(&terminal, &oracle[j]) < 1e-9, "{t}: {terminal:?}");
        assert_eq!(dense.nearest(&terminal), t);
    }
}

#[test]
fn trained_model_is_contractive_and_loss_decreases() {
    let data = synth_dataset(300, 5);
    let cfg = RnnTrainConfig {
        epochs: 120,
        restarts: 1,
        ..Default::default()
    };
    let (rnn, losses) = train_personality_rnn(&data, &cfg).unwrap();
    assert!(losses[..11].windows(2).all(|w| w[1] < w[0]), "{:?}", &losses[..11]);
    assert!(losses.last().unwrap() < &losses[0]);
    for d in data.iter().take(20) {
        let traj = converge_trajectory(&rnn, &d.history, 100).unwrap();
        let step = |k: usize| l2(&traj.states[k], &traj.states[k - 1]);
        // Trained cells often reach the float fixed point well before step 9.
        assert!(step(99) <= step(9), "{} vs {}", step(99), step(9));
        assert!(step(99) < step(1), "{} vs {}", step(99), step(1));
        assert_eq!(extract_trajectory(&rnn, &d.history).unwrap().states.len(), 6);
    }
}
