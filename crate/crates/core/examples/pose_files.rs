//! Writes a sequence to the text pose format, reads it back and shows the
//! header.

use posemine::io::posefile::{format_poses, parse_poses, read_poses, write_poses, PoseHeader};
use posemine::io::synth::{synth, SynthSpec};

fn main() -> posemine::Result<()> {
    let seq = synth(&SynthSpec { duration: 2.0, dropout: 0.1, ..SynthSpec::cyclic() }, 3)?.sequence;

    let header = PoseHeader::for_sequence(&seq, "example");
    let text = format_poses(&seq, &header);
    for line in text.lines().take(8) {
        println!("{line}");
    }
    assert_eq!(parse_poses(&text)?.sequence, seq);

    let path = std::env::temp_dir().join("posemine-example.poses");
    write_poses(&seq, &path)?;
    let back = read_poses(&path)?;
    println!("{} poses of {} joints round-tripped through {}", back.len(), back.joint_count().unwrap_or(0), path.display());
    std::fs::remove_file(path)?;
    Ok(())
}
