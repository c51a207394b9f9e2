//! Fuse per-level responses into one map and check that the mean has the
//! smallest summed KL divergence among a few alternatives.

use mlcf::cfcore::ResponseMap;
use mlcf::fusion::{fuse, kl_divergence, normalize_response, NormalizedResponse};
use ndarray::array;

fn summed_kl(maps: &[NormalizedResponse], q: &NormalizedResponse) -> f64 {
    maps.iter().map(|r| kl_divergence(r, q).unwrap()).sum()
}

fn main() -> mlcf::Result<()> {
    let sharp = ResponseMap::new(array![[0.0, 0.1, 0.0], [0.1, 1.0, 0.2], [0.0, 0.1, 0.0]])?;
    let shifted = ResponseMap::new(array![[0.0, 0.0, 0.1], [0.0, 0.4, 0.9], [0.0, 0.1, 0.2]])?;
    let flat = ResponseMap::new(array![[0.3, 0.3, 0.3], [0.3, 0.5, 0.4], [0.3, 0.3, 0.3]])?;
    let maps: Vec<_> = [sharp, shifted, flat].iter().map(normalize_response).collect();
    let q = fuse(&maps)?;
    println!("fused map:\n{:.3}", q.data());
    println!("summed KL at the mean: {:.5}", summed_kl(&maps, &q));
    for (i, m) in maps.iter().enumerate() {
        println!("summed KL at level {i}: {:.5}", summed_kl(&maps, m));
    }
    let (r, c, _) = q.clone().into_response().argmax();
    println!("fused peak at ({r}, {c})");
    Ok(())
}
