//! Aligns a pose to a rotated, scaled and shifted copy of itself and compares
//! the directed and normalized distances.

use posemine::{align, mse_directed, mse_norm, Pose, SimilarityTransform, DEFAULT_S_REF};

fn main() -> posemine::Result<()> {
    let reference = Pose::new(vec![
        [0.0, 0.0],
        [0.0, -60.0],
        [-30.0, -40.0],
        [30.0, -40.0],
        [-15.0, 60.0],
        [15.0, 60.0],
    ])?;
    let t = SimilarityTransform::from_parts(1.8, 0.6, 250.0, -40.0);
    let mut moved: Vec<[f64; 2]> = reference.transformed(&t).joints().to_vec();
    moved[2][0] += 12.0; // one arm slightly off

    let pose = Pose::new(moved)?;
    // the fitted transform maps the pose onto the reference, so it undoes `t`
    let fit = align(&reference, &pose)?;
    println!(
        "pose onto reference: scale {:.3} rotation {:.3} translation ({:.1}, {:.1})",
        fit.transform.scale(),
        fit.transform.rotation(),
        fit.transform.tx,
        fit.transform.ty
    );
    println!("directed mse, reference first: {:.3}", mse_directed(&reference, &pose)?);
    println!("directed mse, pose first:      {:.3}", mse_directed(&pose, &reference)?);
    println!("normalized distance at s_ref {DEFAULT_S_REF}: {:.3}", mse_norm(&reference, &pose, DEFAULT_S_REF)?);
    Ok(())
}
