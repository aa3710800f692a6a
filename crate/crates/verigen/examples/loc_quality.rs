//! Line counting and the programmability score: classify a generated module
//! into blank/comment/code lines, then combine generated lines, corrected
//! lines, and prompt-query count into the quality figure.
//!
//! ```bash
//! cargo run -p verigen --example loc_quality
//! ```

use verigen::metrics::{changed_lines, count_loc, quality};

const GENERATED: &str = "\
// button press counter
module button_count (
  input clk,
  input rst,
  input btn,
  output reg [7:0] count
);

  /* synchronous clear,
     increment while pressed */
  always @(posedge clk) begin
    if (rst)
      count <= 8'd0;
    else if (btn)
      count <= count + 8'd1; // one per cycle
  end

endmodule
";

fn main() {
    let count = count_loc(GENERATED);
    println!(
        "lines: total={} blank={} comment={} code={}",
        count.total, count.blank, count.comment, count.code
    );

    // A human fix that touches two lines.
    let corrected = GENERATED
        .replace("count <= 8'd0;", "count <= 8'h00;")
        .replace(
            "count <= count + 8'd1; // one per cycle",
            "count <= count + 1'b1; // one per cycle",
        );
    let corrected_lines = changed_lines(GENERATED, &corrected);
    println!("human correction touched {corrected_lines} line(s)");

    let prompt_queries = 2; // setup + one module body
    println!(
        "quality = {} (raw) + {} (corrected) - {} (prompts) = {}",
        count.code,
        corrected_lines,
        prompt_queries,
        quality(count.code, corrected_lines, prompt_queries)
    );
}
