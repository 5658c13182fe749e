use acband::data::{epsilon_best_set, generate_exponential_scenario};
use acband::{run_acband, AcBandParams, MatrixOracle, StatisticKind};

fn main() -> acband::Result<()> {
    let (matrix, truth) = generate_exponential_scenario(200, 5000, 0.1, 0.1, 300.0, 7)?;
    let params = AcBandParams {
        k: 4, alpha: 0.1, delta: 0.05, epsilon: 0.1,
        n0: 58, budget: 4000, seed: 1,
    };
    let mut oracle = MatrixOracle::new(&matrix, params.seed);
    let result = run_acband(&params, &mut oracle, StatisticKind::WinFrequency)?;
    let band = epsilon_best_set(&truth.lambdas, truth.epsilon);
    println!("winner {:?}, cpu {:.1}s, epsilon-best: {}",
        result.winner, result.cpu.total_seconds, band.contains(&result.winner));
    Ok(())
}
