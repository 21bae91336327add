//! The binary tensor interchange format: write a batch of real planes,
//! transform it to a stored half spectrum, invert it back, all through the
//! same files the `fftconv fft` subcommand reads and writes.
//!
//! Run with `cargo run --example golden_tensors`.

use fftconv::bench::{fft_file_forward, fft_file_inverse};
use fftconv::tensor::{random_tensor, read_tensor, write_tensor, StoredTensor};
use fftconv::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("fftconv-golden-example");
    std::fs::create_dir_all(&dir)?;

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let planes = random_tensor([2, 3, 6, 6], &mut rng);

    let real_path = dir.join("planes.fbt");
    write_tensor(&real_path, &StoredTensor::Real(planes.clone()))?;
    let bytes = std::fs::metadata(&real_path)?.len();
    println!(
        "wrote {:?}: dims {:?}, {} floats, {} bytes on disk",
        real_path,
        planes.dims,
        planes.data.len(),
        bytes
    );

    // Forward: each 6x6 plane becomes 6 rows of 4 column bins. The missing
    // bins are the conjugate mirrors of the stored ones.
    let spectrum = fft_file_forward(&planes)?;
    let spec_path = dir.join("spectrum.fbt");
    write_tensor(&spec_path, &StoredTensor::Complex(spectrum.clone()))?;
    println!(
        "spectrum dims {:?} ({} complex values per plane)",
        spectrum.dims,
        spectrum.dims[2] * spectrum.dims[3]
    );

    // The file round trips through the loader unchanged.
    match read_tensor(&spec_path)? {
        StoredTensor::Complex(back) => {
            assert_eq!(back.dims, spectrum.dims);
            assert_eq!(back.data, spectrum.data);
            println!("spectrum file reloads bit-exactly");
        }
        StoredTensor::Real(_) => unreachable!("wrote a spectrum"),
    }

    // Inverse needs the original width: 4 bins could have come from width
    // 6 or 7. The DC bin of each plane is its sum, a quick sanity check.
    let restored = fft_file_inverse(&spectrum, 6)?;
    let worst = planes
        .data
        .iter()
        .zip(&restored.data)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    println!("inverse round trip: max deviation {worst:.2e}");

    let plane_sum: f32 = planes.plane(0, 0).iter().sum();
    let dc = spectrum.data[0];
    println!(
        "plane (0,0) sum {plane_sum:.4}, DC bin {:.4} {:+.4}i",
        dc.re, dc.im
    );

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
