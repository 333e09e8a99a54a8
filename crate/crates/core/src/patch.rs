//! Overlapping-patch layout planning, patch extraction, and reassembly by
//! coverage-weighted averaging.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Ordered anchor layout of overlapping patches over a cropped working region.
///
/// Anchors enumerate row-major, top-left to bottom-right; the grid tiles the
/// crop region exactly: `crop = (anchors - 1) * stride + patch`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPlan {
    pub patch_h: usize,
    pub patch_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub anchors_y: usize,
    pub anchors_x: usize,
    pub crop_h: usize,
    pub crop_w: usize,
}

impl GridPlan {
    /// Patch vector length (patch area).
    pub fn patch_len(&self) -> usize {
        self.patch_h * self.patch_w
    }

    /// Number of patches the plan produces.
    pub fn patch_count(&self) -> usize {
        self.anchors_y * self.anchors_x
    }

    /// Top-left pixel of the k-th anchor in row-major anchor order.
    pub fn anchor(&self, k: usize) -> (usize, usize) {
        let ay = k / self.anchors_x;
        let ax = k % self.anchors_x;
        (ay * self.stride_h, ax * self.stride_w)
    }
}

/// Patch vectors as columns, in extraction order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    /// Shape (patch_len, count); column k is the row-major flattening of the
    /// patch at the k-th anchor.
    pub columns: Array2<f64>,
}

impl PatchMatrix {
    pub fn patch_len(&self) -> usize {
        self.columns.nrows()
    }

    pub fn count(&self) -> usize {
        self.columns.ncols()
    }
}

/// Plan a square-patch grid with the given overlap fraction.
///
/// The stride is `patch * (1 - overlap_fraction)` and must be integral; the
/// crop is the largest region not exceeding the image dimensions that the
/// anchor grid tiles exactly.
pub fn plan_grid(
    img_h: usize,
    img_w: usize,
    patch: usize,
    overlap_fraction: f64,
) -> Result<GridPlan> {
    if patch == 0 {
        return Err(Error::Argument("patch size must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::Argument(format!(
            "overlap fraction {overlap_fraction} outside [0, 1)"
        )));
    }
    if patch > img_h || patch > img_w {
        return Err(Error::Argument(format!(
            "patch {patch} exceeds image dimensions {img_h}x{img_w}"
        )));
    }
    let stride_real = patch as f64 * (1.0 - overlap_fraction);
    let stride = stride_real.round();
    if (stride_real - stride).abs() > 1e-9 || stride < 1.0 {
        return Err(Error::Argument(format!(
            "patch {patch} with overlap {overlap_fraction} gives non-integral stride {stride_real}"
        )));
    }
    let stride = stride as usize;

    let anchors_y = (img_h - patch) / stride + 1;
    let anchors_x = (img_w - patch) / stride + 1;
    Ok(GridPlan {
        patch_h: patch,
        patch_w: patch,
        stride_h: stride,
        stride_w: stride,
        anchors_y,
        anchors_x,
        crop_h: (anchors_y - 1) * stride + patch,
        crop_w: (anchors_x - 1) * stride + patch,
    })
}

/// Extract the plan's patches from an image, one column per anchor.
pub fn extract_patches(img: &GrayImage, plan: &GridPlan) -> Result<PatchMatrix> {
    if plan.crop_h > img.height() || plan.crop_w > img.width() {
        return Err(Error::Argument(format!(
            "plan crop {}x{} exceeds image {}x{}",
            plan.crop_h,
            plan.crop_w,
            img.height(),
            img.width()
        )));
    }
    let src = img.pixels();
    let mut columns = Array2::zeros((plan.patch_len(), plan.patch_count()));
    for k in 0..plan.patch_count() {
        let (y0, x0) = plan.anchor(k);
        let mut col = columns.column_mut(k);
        let mut i = 0;
        for dy in 0..plan.patch_h {
            for dx in 0..plan.patch_w {
                col[i] = src[[y0 + dy, x0 + dx]];
                i += 1;
            }
        }
    }
    Ok(PatchMatrix { columns })
}

/// Reassemble the crop region from (possibly reconstructed) patches, dividing
/// each pixel's accumulated value by the number of covering patches. Output is
/// clamped to [0, 255].
pub fn assemble_image(patches: &PatchMatrix, plan: &GridPlan) -> Result<GrayImage> {
    if patches.count() != plan.patch_count() {
        return Err(Error::Argument(format!(
            "patch count {} does not match plan's {}",
            patches.count(),
            plan.patch_count()
        )));
    }
    if patches.patch_len() != plan.patch_len() {
        return Err(Error::Argument(format!(
            "patch length {} does not match plan's {}",
            patches.patch_len(),
            plan.patch_len()
        )));
    }
    let mut acc = Array2::<f64>::zeros((plan.crop_h, plan.crop_w));
    for k in 0..plan.patch_count() {
        let (y0, x0) = plan.anchor(k);
        let col = patches.columns.column(k);
        let mut i = 0;
        for dy in 0..plan.patch_h {
            for dx in 0..plan.patch_w {
                acc[[y0 + dy, x0 + dx]] += col[i];
                i += 1;
            }
        }
    }
    let cover = coverage_map(plan);
    ndarray::Zip::from(&mut acc).and(&cover).for_each(|a, &c| {
        *a = (*a / c as f64).clamp(0.0, 255.0);
    });
    GrayImage::new(acc)
}

/// Per-pixel count of covering patches over the crop region.
pub fn coverage_map(plan: &GridPlan) -> Array2<u32> {
    let mut cover = Array2::<u32>::zeros((plan.crop_h, plan.crop_w));
    for k in 0..plan.patch_count() {
        let (y0, x0) = plan.anchor(k);
        cover
            .slice_mut(s![y0..y0 + plan.patch_h, x0..x0 + plan.patch_w])
            .mapv_inplace(|c| c + 1);
    }
    cover
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_plan_yields_1296_patches() {
        let plan = plan_grid(112, 112, 6, 0.5).unwrap();
        assert_eq!(plan.stride_h, 3);
        assert_eq!(plan.stride_w, 3);
        assert_eq!((plan.crop_h, plan.crop_w), (111, 111));
        assert_eq!((plan.anchors_y, plan.anchors_x), (36, 36));
        assert_eq!(plan.patch_count(), 1296);
    }

    #[test]
    fn patch_equal_to_image_is_single_anchor() {
        let plan = plan_grid(6, 6, 6, 0.5).unwrap();
        assert_eq!(plan.patch_count(), 1);
        assert_eq!((plan.crop_h, plan.crop_w), (6, 6));
    }

    #[test]
    fn smallest_overlapping_case() {
        let plan = plan_grid(3, 3, 2, 0.5).unwrap();
        assert_eq!(plan.stride_h, 1);
        assert_eq!((plan.crop_h, plan.crop_w), (3, 3));
        assert_eq!((plan.anchors_y, plan.anchors_x), (2, 2));
        assert_eq!(plan.patch_count(), 4);
    }

    #[test]
    fn oversized_patch_is_argument_error() {
        assert!(matches!(plan_grid(4, 4, 6, 0.5), Err(Error::Argument(_))));
    }

    #[test]
    fn non_integral_stride_is_argument_error() {
        assert!(matches!(plan_grid(9, 9, 3, 0.5), Err(Error::Argument(_))));
    }

    #[test]
    fn anchor_counts_match_brute_force_enumeration() {
        // enumerate every stride-aligned anchor that fits inside the image
        for img in 1usize..=32 {
            for patch in 1usize..=8.min(img) {
                for overlap in [0.0, 0.5] {
                    let stride_real = patch as f64 * (1.0 - overlap);
                    if (stride_real - stride_real.round()).abs() > 1e-9 || stride_real < 1.0 {
                        continue;
                    }
                    let stride = stride_real.round() as usize;
                    let brute = (0..)
                        .map(|i| i * stride)
                        .take_while(|&a| a + patch <= img)
                        .count();
                    let plan = plan_grid(img, img, patch, overlap).unwrap();
                    assert_eq!(plan.anchors_y, brute, "img {img} patch {patch} overlap {overlap}");
                }
            }
        }
    }

    fn seq_image(h: usize, w: usize) -> GrayImage {
        GrayImage::from_vec(h, w, (0..h * w).map(|i| (i % 256) as f64).collect()).unwrap()
    }

    #[test]
    fn extract_3x3_first_column() {
        let img = GrayImage::from_vec(3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let plan = plan_grid(3, 3, 2, 0.5).unwrap();
        let patches = extract_patches(&img, &plan).unwrap();
        assert_eq!(patches.count(), 4);
        let first: Vec<f64> = patches.columns.column(0).to_vec();
        assert_eq!(first, vec![1.0, 2.0, 4.0, 5.0]);
    }

    #[test]
    fn constant_image_gives_constant_columns() {
        let img = GrayImage::constant(8, 8, 42.0).unwrap();
        let plan = plan_grid(8, 8, 4, 0.5).unwrap();
        let patches = extract_patches(&img, &plan).unwrap();
        assert!(patches.columns.iter().all(|&v| v == 42.0));
    }

    #[test]
    fn paper_geometry_patch_matrix_shape() {
        let img = seq_image(112, 112);
        let plan = plan_grid(112, 112, 6, 0.5).unwrap();
        let patches = extract_patches(&img, &plan).unwrap();
        assert_eq!(patches.patch_len(), 36);
        assert_eq!(patches.count(), 1296);
    }

    #[test]
    fn plan_image_mismatch_is_argument_error() {
        let img = seq_image(8, 8);
        let plan = plan_grid(16, 16, 4, 0.5).unwrap();
        assert!(matches!(extract_patches(&img, &plan), Err(Error::Argument(_))));
    }

    #[test]
    fn assemble_extract_identity_on_crop() {
        for (h, w, patch, overlap) in [(3, 3, 2, 0.5), (8, 10, 4, 0.5), (13, 7, 3, 0.0), (112, 112, 6, 0.5)] {
            let img = seq_image(h, w);
            let plan = plan_grid(h, w, patch, overlap).unwrap();
            let patches = extract_patches(&img, &plan).unwrap();
            let back = assemble_image(&patches, &plan).unwrap();
            let crop = img.crop(plan.crop_h, plan.crop_w).unwrap();
            let max_err = back
                .pixels()
                .iter()
                .zip(crop.pixels().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_err <= 1e-12, "round-trip error {max_err} for {h}x{w} patch {patch}");
        }
    }

    #[test]
    fn coverage_pattern_3x3_patch2() {
        let plan = plan_grid(3, 3, 2, 0.5).unwrap();
        let cover = coverage_map(&plan);
        let expect = [[1, 2, 1], [2, 4, 2], [1, 2, 1]];
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(cover[[y, x]], expect[y][x]);
            }
        }
    }

    #[test]
    fn coverage_non_overlapping_all_ones() {
        let plan = plan_grid(8, 8, 4, 0.0).unwrap();
        assert!(coverage_map(&plan).iter().all(|&c| c == 1));
    }

    #[test]
    fn coverage_paper_plan_interior_is_four() {
        let plan = plan_grid(112, 112, 6, 0.5).unwrap();
        let cover = coverage_map(&plan);
        assert!(cover.iter().all(|&c| c >= 1));
        // brute-force verification against anchor enumeration
        let mut brute = Array2::<u32>::zeros((plan.crop_h, plan.crop_w));
        for ay in 0..plan.anchors_y {
            for ax in 0..plan.anchors_x {
                for dy in 0..6 {
                    for dx in 0..6 {
                        brute[[ay * 3 + dy, ax * 3 + dx]] += 1;
                    }
                }
            }
        }
        assert_eq!(cover, brute);
        // interior pixels sit under exactly four 6x6 patches at stride 3
        assert_eq!(cover[[55, 55]], 4);
        assert_eq!(cover[[6, 6]], 4);
    }

    #[test]
    fn single_patch_assembly_is_the_patch() {
        let img = seq_image(6, 6);
        let plan = plan_grid(6, 6, 6, 0.5).unwrap();
        let patches = extract_patches(&img, &plan).unwrap();
        let back = assemble_image(&patches, &plan).unwrap();
        assert_eq!(back.pixels(), img.pixels());
    }

    #[test]
    fn assemble_count_mismatch_is_argument_error() {
        let plan = plan_grid(3, 3, 2, 0.5).unwrap();
        let patches = PatchMatrix {
            columns: Array2::zeros((4, 3)),
        };
        assert!(matches!(assemble_image(&patches, &plan), Err(Error::Argument(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_identity_random_geometry(
                h in 2usize..24,
                w in 2usize..24,
                patch in 1usize..6,
                seed in any::<u64>(),
            ) {
                prop_assume!(patch <= h && patch <= w);
                let mut s = seed;
                let mut next = || {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 33) % 256) as f64
                };
                let img = GrayImage::from_vec(h, w, (0..h * w).map(|_| next()).collect()).unwrap();
                // overlap 0 always yields an integral stride
                let plan = plan_grid(h, w, patch, 0.0).unwrap();
                let back = assemble_image(&extract_patches(&img, &plan).unwrap(), &plan).unwrap();
                let crop = img.crop(plan.crop_h, plan.crop_w).unwrap();
                for (a, b) in back.pixels().iter().zip(crop.pixels().iter()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }
    }
}
