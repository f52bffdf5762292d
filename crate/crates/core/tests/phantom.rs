use std::collections::VecDeque;

use mammoscope_core::phantom::{self, Lesion, PhantomConfig};
use mammoscope_core::Label;

fn cfg() -> PhantomConfig {
    PhantomConfig { count_per_class: 12, ..PhantomConfig::default() }
}

#[test]
fn mass_peak_exceeds_background_by_three_sigma() {
    let cfg = cfg();
    let mut checked = 0;
    for i in 0..cfg.image_count() {
        let img = phantom::generate_image(&cfg, i);
        let Lesion::Mass { row, col, radius } = img.lesion else { continue };
        let bg = phantom::tissue_background(&cfg, i);
        let (mut peak, mut bg_sum, mut n) = (f64::MIN, 0.0, 0.0);
        for r in 0..cfg.size {
            for c in 0..cfg.size {
                let (dy, dx) = (r as f64 - row, c as f64 - col);
                if dy * dy + dx * dx <= radius * radius {
                    peak = peak.max(img.image.get(r, c));
                    bg_sum += bg.get(r, c);
                    n += 1.0;
                }
            }
        }
        let bg_mean = bg_sum / n;
        assert!(peak > bg_mean + 3.0 * cfg.noise_sigma, "image {i}: peak {peak} vs background {bg_mean}");
        checked += 1;
    }
    assert_eq!(checked, 6);
}

fn largest_bright_region(excess: &[bool], size: usize) -> usize {
    let mut seen = vec![false; excess.len()];
    let mut best = 0;
    for start in 0..excess.len() {
        if !excess[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 0;
        while let Some(p) = queue.pop_front() {
            count += 1;
            let (r, c) = (p / size, p % size);
            let mut visit = |q: usize| {
                if excess[q] && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            };
            if r > 0 {
                visit(p - size);
            }
            if r + 1 < size {
                visit(p + size);
            }
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < size {
                visit(p + 1);
            }
        }
        best = best.max(count);
    }
    best
}

#[test]
fn normal_images_have_no_bright_regions() {
    let cfg = cfg();
    for i in 0..cfg.count_per_class {
        let img = phantom::generate_image(&cfg, i);
        assert_eq!(img.label, Label::Normal);
        let bg = phantom::tissue_background(&cfg, i);
        let excess: Vec<bool> = img
            .image
            .pixels()
            .iter()
            .zip(bg.pixels())
            .map(|(p, b)| p - b > 3.0 * cfg.noise_sigma)
            .collect();
        let largest = largest_bright_region(&excess, cfg.size);
        assert!(largest <= 4, "image {i}: bright region of {largest} pixels");
    }
}

#[test]
fn microcalcification_specks_stand_out() {
    let cfg = cfg();
    for i in cfg.count_per_class..cfg.image_count() {
        let img = phantom::generate_image(&cfg, i);
        let Lesion::Microcalcifications { specks } = &img.lesion else { continue };
        let bg = phantom::tissue_background(&cfg, i);
        let bright = specks.iter().filter(|&&(r, c)| img.image.get(r, c) - bg.get(r, c) > 3.0 * cfg.noise_sigma).count();
        assert!(bright * 10 >= specks.len() * 9, "image {i}: {bright}/{} specks bright", specks.len());
    }
}

#[test]
fn files_are_byte_identical_across_runs() {
    let cfg = PhantomConfig { size: 48, count_per_class: 3, mass_radius: 6.0, ..PhantomConfig::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = phantom::write_phantom_set(&cfg, a.path()).unwrap();
    let mb = phantom::write_phantom_set(&cfg, b.path()).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(ma.len(), 6);
    for name in ma.iter().map(|e| e.path.as_str()).chain(["manifest.csv"]) {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}
