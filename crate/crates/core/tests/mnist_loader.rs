use std::io::Write;

use qshiftdp::data::load_downscaled_mnist;
use qshiftdp::Error;

fn file(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn row(v: f64, label: i64) -> String {
    let mut fields: Vec<String> = (0..16).map(|i| format!("{}", if i % 3 == 0 { v } else { 0.25 })).collect();
    fields.push(label.to_string());
    fields.join(",")
}

#[test]
fn two_well_formed_rows() {
    let f = file(&format!("{}\n{}\n", row(0.5, 3), row(1.0, 8)));
    let d = load_downscaled_mnist(f.path()).unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(d.input_dim(), 16);
    assert_eq!(d.labels(), &[0, 1]);
    assert_eq!(d.provenance["source_labels"], "3,8");
}

#[test]
fn header_is_skipped_and_labels_sorted() {
    let header: Vec<String> = (0..16).map(|i| format!("p{i}")).chain(["label".into()]).collect();
    let f = file(&format!("{}\n{}\n{}\n{}\n", header.join(","), row(0.1, 7), row(0.2, 1), row(0.3, 7)));
    let d = load_downscaled_mnist(f.path()).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d.labels(), &[1, 0, 1]);
}

#[test]
fn short_row_names_its_line() {
    let mut bad: Vec<String> = (0..15).map(|_| "0.5".to_string()).collect();
    bad.push("1".into());
    let f = file(&format!("{}\n{}\n{}\n", row(0.5, 0), row(0.5, 1), bad.join(",")));
    match load_downscaled_mnist(f.path()) {
        Err(Error::Parse { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("16"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn out_of_range_values_are_rejected() {
    let f = file(&format!("{}\n{}\n", row(0.5, 0), row(1.5, 1)));
    match load_downscaled_mnist(f.path()) {
        Err(Error::Parse { line: 2, message, .. }) => assert!(message.contains("outside")),
        other => panic!("expected a range error, got {other:?}"),
    }
}

#[test]
fn empty_and_malformed_files_fail() {
    assert!(load_downscaled_mnist(file("").path()).is_err());
    let f = file(&format!("{}\n{}\n", row(0.5, 0), row(0.5, 1).replace("0.25", "x")));
    assert!(matches!(load_downscaled_mnist(f.path()), Err(Error::Parse { line: 2, .. })));
    let f = file(&format!("{}\n{}\n{}\n", row(0.5, 0), row(0.5, 1), row(0.5, 2)));
    assert!(load_downscaled_mnist(f.path()).is_err());
    assert!(load_downscaled_mnist("/nonexistent/file.csv").is_err());
}
