//! Writing and reading orientation lists, and Euler-angle input.

use std::io::Cursor;

use ginvariant::experiments::{read_orientations, write_quaternions, Format};
use ginvariant::sampler::{sample_uniform_sphere, RngStream};
use ginvariant::symgroup::quaternion_to_euler;

fn main() -> ginvariant::Result<()> {
    let xs = sample_uniform_sphere(3, &mut RngStream::new(0));
    let mut buf = Vec::new();
    write_quaternions(&mut buf, &xs, Some("three uniform orientations"))?;
    print!("{}", String::from_utf8_lossy(&buf));

    let back = read_orientations(Cursor::new(&buf), Format::Quat)?;
    let mut euler = String::from("phi1,Phi,phi2\n");
    for q in back.iter() {
        let [a, b, c] = quaternion_to_euler(q);
        euler.push_str(&format!("{a},{b},{c}\n"));
    }
    let from_euler = read_orientations(euler.as_bytes(), Format::Euler)?;
    for (q, r) in xs.iter().zip(from_euler.iter()) {
        println!("|q·r| = {:.15}", q.dot(r).abs());
    }

    match read_orientations("q1,q2,q3,q4\n1,0,0,0\n3,0,0,0\n".as_bytes(), Format::Quat) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
