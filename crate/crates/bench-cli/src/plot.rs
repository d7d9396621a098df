/// Gnuplot script drawing spacings, speeds and controls from trajectory.csv.
pub fn gnuplot_script(n: usize, label: &str, p: usize) -> String {
    let series = |first_col: usize, name: &str| {
        (0..n)
            .map(|i| format!("'trajectory.csv' using 2:{} with lines title '{name}_{}'", first_col + i, i + 1))
            .collect::<Vec<_>>()
            .join(", \\\n     ")
    };
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead outside right\n\
         set terminal pngcairo size 1200,1200\n\
         set output 'trajectory.png'\n\
         set multiplot layout 3,1 title '{label}, p = {p}'\n\
         set xlabel 't [s]'\n\
         set ylabel 'spacing [m]'\n\
         plot {}\n\
         set ylabel 'speed [m/s]'\n\
         plot 'trajectory.csv' using 2:3 with lines lw 2 title 'v_0', \\\n     {}\n\
         set ylabel 'u [m/s^2]'\n\
         plot 'trajectory.csv' using 2:4 with lines lw 2 title 'u_0', \\\n     {}\n\
         unset multiplot\n",
        series(5, "S"),
        series(5 + n, "v"),
        series(5 + 2 * n, "u"),
    )
}
