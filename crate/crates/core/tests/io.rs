mod common;

use common::{fixture_path, random_image};
use compiqa::config::Config;
use compiqa::io::{decode_image, encode_pgm, encode_pgm16, read_image, write_pgm, write_pgm16};
use compiqa::{Error, GrayImage, Variant};

fn png_bytes(w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut wr = enc.write_header().unwrap();
        wr.write_image_data(data).unwrap();
    }
    out
}

#[test]
fn pgm_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let img = random_image(13, 7, 1);
    let p8 = dir.path().join("a.pgm");
    write_pgm(&p8, &img).unwrap();
    let back = read_image(&p8).unwrap();
    assert_eq!((back.width(), back.height()), (13, 7));
    for (a, b) in back.data().iter().zip(img.data()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
    }
    let p16 = dir.path().join("b.pgm");
    write_pgm16(&p16, &img).unwrap();
    for (a, b) in read_image(&p16).unwrap().data().iter().zip(img.data()) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
    }
}

#[test]
fn pgm_header_comments() {
    let mut bytes = b"P5\n# made by hand\n3 # width\n2\n255\n".to_vec();
    bytes.extend([0u8, 51, 102, 153, 204, 255]);
    let img = decode_image(&bytes).unwrap();
    assert_eq!(img.data(), &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
}

#[test]
fn malformed_inputs() {
    assert!(matches!(decode_image(b"P2\n1 1\n255\n0"), Err(Error::Format(_))));
    assert!(matches!(decode_image(b"P5\n4 4\n255\n\x00\x01"), Err(Error::Format(_))));
    assert!(matches!(decode_image(b"P5\n"), Err(Error::Format(_))));
    assert!(matches!(decode_image(b"\x89PNG\r\n\x1a\nrubbish"), Err(Error::Format(_))));
    assert!(matches!(read_image("/nonexistent/x.pgm"), Err(Error::Io { .. })));
    let good = encode_pgm(&GrayImage::constant(2, 2, 0.5).unwrap());
    assert!(decode_image(&good).is_ok());
    assert_eq!(encode_pgm16(&GrayImage::constant(1, 1, 1.0).unwrap()).len(), "P5\n1 1\n65535\n".len() + 2);
}

#[test]
fn png_variants() {
    let g = png_bytes(3, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[0, 128, 255]);
    assert_eq!(decode_image(&g).unwrap().data(), &[0.0, 128.0 / 255.0, 1.0]);

    let g16 = png_bytes(2, 1, png::ColorType::Grayscale, png::BitDepth::Sixteen, &[0, 0, 0xff, 0xff]);
    assert_eq!(decode_image(&g16).unwrap().data(), &[0.0, 1.0]);

    let rgb = png_bytes(2, 1, png::ColorType::Rgb, png::BitDepth::Eight, &[255, 0, 0, 0, 0, 255]);
    let d = decode_image(&rgb).unwrap();
    assert!((d.data()[0] - 0.299).abs() < 1e-12);
    assert!((d.data()[1] - 0.114).abs() < 1e-12);

    let rgba = png_bytes(1, 1, png::ColorType::Rgba, png::BitDepth::Eight, &[0, 255, 0, 7]);
    assert!((decode_image(&rgba).unwrap().data()[0] - 0.587).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.png");
    std::fs::write(&path, &g).unwrap();
    assert_eq!(read_image(&path).unwrap().width(), 3);
}

#[test]
fn fixtures_load() {
    let img = read_image(fixture_path("camera.pgm")).unwrap();
    assert_eq!((img.width(), img.height()), (128, 128));
    assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn config_file_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# sweep\nciqa.variant = c\ntrim.margin = inf\nrecon.beta_count = 8 # fewer\nseed = 9\n").unwrap();
    let c = Config::from_file(&path).unwrap();
    assert_eq!(c.ciqa.variant, Variant::C);
    assert!(c.trim.margin.is_infinite());
    assert_eq!((c.beta_count, c.seed), (8, 9));
    assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    let p = c.recon_params(1e-3, 0.0);
    assert!((p.mu - 1e-5).abs() < 1e-20);
    assert!(matches!(Config::parse("recon.sample_fraction = 1.5"), Err(Error::Config(_))));
    assert!(matches!(Config::parse("ciqa.n = ten"), Err(Error::Config(_))));
    assert!(matches!(Config::from_file(dir.path().join("missing.cfg")), Err(Error::Io { .. })));
}
