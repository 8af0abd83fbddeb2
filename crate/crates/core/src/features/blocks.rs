use ndarray::{s, Array2};

/// Splits `frames x bands` features into consecutive `block_length`-frame
/// blocks, zero-padding the last one. Always returns at least one block.
pub fn partition_blocks(features: &Array2<f64>, block_length: usize) -> Vec<Array2<f64>> {
    assert!(block_length >= 1, "block_length must be at least 1");
    let (frames, bands) = features.dim();
    let count = frames.div_ceil(block_length).max(1);
    (0..count)
        .map(|b| {
            let start = b * block_length;
            let end = (start + block_length).min(frames);
            let mut block = Array2::zeros((block_length, bands));
            if start < end {
                block
                    .slice_mut(s![..end - start, ..])
                    .assign(&features.slice(s![start..end, ..]));
            }
            block
        })
        .collect()
}
