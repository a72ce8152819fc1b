//! Blending with the search's initial image.

use crate::error::Result;
use crate::filter::mean;
use crate::image::Image;

/// `w * a + (1 - w) * b`, clamped. `w = 1` returns `a` and `w = 0` returns
/// `b` exactly.
pub fn stack_weighted(a: &Image, b: &Image, weight: f64) -> Result<Image> {
    a.ensure_same_shape(b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| weight * x + (1.0 - weight) * y)
        .collect();
    Ok(Image::from_raw_clamped(
        a.width(),
        a.height(),
        a.channels(),
        data,
    ))
}

/// `v - amount * initial + amount * mean(initial)`, with the mean taken per
/// channel so each channel's average level is kept.
pub fn subtract_initial(image: &Image, initial: &Image, amount: f64) -> Result<Image> {
    image.ensure_same_shape(initial)?;
    let planes = image
        .planes()
        .zip(initial.planes())
        .map(|(p, q)| {
            let level = amount * mean(q);
            p.iter()
                .zip(q)
                .map(|(&v, &i)| v - amount * i + level)
                .collect()
        })
        .collect();
    Ok(Image::from_planes(image.width(), image.height(), planes))
}
