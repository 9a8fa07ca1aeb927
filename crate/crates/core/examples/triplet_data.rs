//! Synthetic triplets, the plain-text triplet format and table conversion.

use rckl::data::{
    convert_table, gen_points, parse_triplets, query_count, sample_queries, answer_all,
    write_triplets, TableFormat,
};

fn main() -> rckl::Result<()> {
    let n = 8;
    let cloud = gen_points(n, 2, 21)?;
    let triplets = answer_all(&cloud, sample_queries(n, 5, 22)?)?;
    println!("{} objects admit {} distinct queries", n, query_count(n));

    let mut buf = Vec::new();
    write_triplets(&mut buf, n, &triplets)?;
    let text = String::from_utf8(buf).expect("utf-8");
    println!("--- triplet file ---\n{text}");
    let back = parse_triplets(text.as_bytes())?;
    assert_eq!(back.rows, triplets);

    let table = "head\tnear\tfar\ncat\tlion\ttrout\ntrout\tsalmon\tlion\nlion\tcat\tsalmon\n";
    let format = TableFormat {
        delimiter: b'\t',
        has_header: true,
        labels: true,
        ..TableFormat::default()
    };
    let converted = convert_table(table.as_bytes(), &format)?;
    println!("labels: {:?}", converted.labels.unwrap_or_default());
    for t in &converted.file.rows {
        println!("{} {} {}", t.a, t.b, t.c);
    }
    Ok(())
}
