use slag::config::Config;
use slag::io::{self, Format};
use slag::solver::{Grid, ScalarField3};
use slag::Error;

fn field() -> ScalarField3 {
    let g = Grid::new([-0.5, -0.25, 0.0], 0.125, [5, 5, 5]).unwrap();
    ScalarField3::from_fn(&g, |x| (x[0] * 3.0).sin() + x[1] * x[2] / 7.0)
}

#[test]
fn slf_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.slf");
    let f = field();
    io::write_field(&f, &path, Format::Slf).unwrap();
    let g = io::read_field(&path).unwrap();
    assert_eq!(f.dims, g.dims);
    assert!(f.values.iter().zip(&g.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 126);
    assert!(text.starts_with("SLF1 5 5 5 "));
}

#[test]
fn csv_and_vtk_layout() {
    let dir = tempfile::tempdir().unwrap();
    let f = field();
    let c = dir.path().join("f.csv");
    let v = dir.path().join("f.vtk");
    io::write_field(&f, &c, Format::Csv).unwrap();
    io::write_field(&f, &v, Format::Vtk).unwrap();
    let csv = std::fs::read_to_string(&c).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,z,value"));
    assert_eq!(csv.lines().count(), 126);
    let vtk = std::fs::read_to_string(&v).unwrap();
    assert!(vtk.contains("DATASET STRUCTURED_POINTS"));
    assert!(vtk.contains("POINT_DATA 125"));
}

#[test]
fn truncated_slf_is_a_format_error() {
    let r = io::read_slf("SLF1 5 5 5 0 0 0 1\n1\n2\n".as_bytes());
    assert!(matches!(r, Err(Error::Format(_))));
}

#[test]
fn unwritable_path_is_io_error() {
    let e = io::write_field(&field(), std::path::Path::new("/nonexistent/dir/f.slf"), Format::Slf).unwrap_err();
    assert!(matches!(e, Error::Io(_)));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ini");
    let mut c = Config::default();
    c.explicit.lambda = 0.03;
    c.section3.eps_seq = vec![0.001, 0.0005];
    std::fs::write(&path, c.to_ini_string()).unwrap();
    assert_eq!(Config::load(&path).unwrap(), c);
}

#[test]
fn bad_values_are_config_errors() {
    for text in ["[solver]\ntol = abc\n", "[solver]\nmodel_r_outer = 2\n", "[explicit]\neps_r = 0.9\n"] {
        assert!(matches!(Config::from_ini_str(text), Err(Error::Config(_))), "{text}");
    }
    assert!(matches!(Config::load(std::path::Path::new("/nonexistent.ini")), Err(Error::Io(_))));
}
