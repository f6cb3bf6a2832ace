// Constant thickening on the affine group: the count in `U` follows
// `t (vol(U) + vol(U f^-1))`, not `2 t vol(U)`.

use palmlab::geometry::right_translate_volume;
use palmlab::palm::check_nonunimodular_thickening;
use palmlab::{Carrier, GroupPoint, Window};

pub fn run_example() -> palmlab::Result<bool> {
    let u = Window::affine_box((1.0, 2.0), (0.0, 1.0));
    let f = GroupPoint::new(&[2.0, 0.0]);
    let affine = Carrier::affine();
    println!(
        "vol(U) = {:.4}, vol(U f^-1) = {:.4}",
        u.haar_volume(&affine),
        right_translate_volume(&affine, &u, &f)?
    );
    let reports = check_nonunimodular_thickening(20.0, &u, &f, 2000, 1)?;
    for r in &reports {
        println!(
            "{} {:.3} (reference {:?}) pass = {}",
            r.statistic, r.estimate, r.reference, r.pass
        );
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn main() -> palmlab::Result<()> {
    run_example().map(|_| ())
}
