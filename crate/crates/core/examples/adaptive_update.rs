//! Learning rate over a score trace with a sudden drop (an occlusion) and
//! a recovery.

use mlcf::adaptive::{learning_rate, ScoreHistory};

fn main() -> mlcf::Result<()> {
    let trace = [0.90, 0.91, 0.89, 0.92, 0.90, 0.55, 0.50, 0.80, 0.91, 0.99];
    let mut history = ScoreHistory::new(5, 0.05, 0.01)?;
    println!("frame  score  confidence  eta");
    for (t, &s) in trace.iter().enumerate() {
        let c = history.confidence(s);
        let eta = learning_rate(c, history.tau, history.eta_base);
        println!("{t:5}  {s:.2}   {c:+.4}     {eta:.5}");
        history.push(s)?;
    }
    Ok(())
}
