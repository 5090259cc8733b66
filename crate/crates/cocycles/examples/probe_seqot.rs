// Scratch probe: seq-OT shift estimate vs bandwidth scaling. Not shipped.
use cocycles::benchgen::{generate, DesignSpec};
use cocycles::ot::{chain_nodes, SeqOtModel};

fn main() {
    for rho in [0.0, 0.8] {
        let (data, _) = generate(&DesignSpec::Chain { rho, n: 1500, seed: 21 }).unwrap();
        let m = SeqOtModel::fit(chain_nodes(), &data).unwrap();
        let mut shift1 = 0.0;
        let mut shift2 = 0.0;
        let mut inner1 = 0.0;
        let mut inner2 = 0.0;
        let mut count = 0.0;
        let mut inner_count = 0.0;
        for i in 0..data.n() {
            let out = m.transport(&data.x[i], &[data.x[i][0] + 1.0], &data.y[i]).unwrap();
            shift1 += out[0] - data.y[i][0];
            shift2 += out[1] - data.y[i][1];
            count += 1.0;
            // interior units only: both parents well inside the data range
            if data.x[i][0].abs() < 1.0 && data.y[i][0].abs() < 1.5 {
                inner1 += out[0] - data.y[i][0];
                inner2 += out[1] - data.y[i][1];
                inner_count += 1.0;
            }
        }
        println!(
            "rho={rho}: all y1={:.3} y2={:.3}  interior y1={:.3} y2={:.3} (n_int={})",
            shift1 / count,
            shift2 / count,
            inner1 / inner_count,
            inner2 / inner_count,
            inner_count
        );
    }
}
