//! Distortion measures of a deformation gradient.
//!
//! `cargo run --example distortion -- 2 1 0 3`

use confrelax::kinematics::{
    dev_log_stretch_norm_sq, euclid_dist_cso2_sq, k_from_kk, linear_distortion, outer_distortion, singular_values,
};
use confrelax::Mat2;

fn main() -> confrelax::Result<()> {
    let v: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let f = match v[..] {
        [a, b, c, d] => Mat2::new(a, b, c, d),
        _ => Mat2::new(2.0, 1.0, 0.0, 3.0),
    };
    let sv = singular_values(&f)?;
    let kk = outer_distortion(&f)?;
    println!("F = [[{}, {}], [{}, {}]], det = {}", f.e11, f.e12, f.e21, f.e22, f.det());
    println!("singular values  {:.12} {:.12}", sv.lambda_max, sv.lambda_min);
    println!("outer  𝕂        {kk:.12}");
    println!("linear K        {:.12} (from 𝕂: {:.12})", linear_distortion(&f)?, k_from_kk(kk)?);
    println!("‖dev log U‖²    {:.12}", dev_log_stretch_norm_sq(&f)?);
    println!("dist²(F, CSO2)  {:.12}", euclid_dist_cso2_sq(&f));

    // invariance under F ↦ aR₁FR₂
    let g = (Mat2::rotation(0.7) * f * Mat2::rotation(-2.1)).scale(3.5);
    println!("𝕂 after aR₁FR₂  {:.12}", outer_distortion(&g)?);
    Ok(())
}
