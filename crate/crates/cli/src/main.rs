use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use formkernel::harness::{
    assemble, compare, compile_form, exit_code, generate, render_trend_table, trend_suite, unit_square_mesh, BuildOptions,
    CompareOptions, ComparisonReport, CompiledForm, FormSpaces, HarnessError, DEFAULT_BENCH_N,
};
use formkernel::kernel::{count_flops, Representation};
use formkernel::quadrep::QuadratureOptions;
use formkernel::tensorrep::TensorOptions;

const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "formkernel", version, about = "Compile variational forms to element-tensor kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Repr {
    Quadrature,
    Tensor,
}

impl From<Repr> for Representation {
    fn from(r: Repr) -> Self {
        match r {
            Repr::Quadrature => Representation::Quadrature,
            Repr::Tensor => Representation::Tensor,
        }
    }
}

#[derive(clap::Args)]
struct Optimizations {
    /// Keep basis-table columns that are zero at every point.
    #[arg(long)]
    no_zero_elimination: bool,
    /// Recompute geometry and coefficients inside the innermost loop.
    #[arg(long)]
    no_hoisting: bool,
    /// Keep explicit zero terms in tensor contractions.
    #[arg(long)]
    keep_zeros: bool,
    /// Quadrature points per direction instead of the degree estimate.
    #[arg(long)]
    points: Option<usize>,
}

impl Optimizations {
    fn build_options(&self) -> BuildOptions {
        BuildOptions {
            points: self.points,
            quadrature: QuadratureOptions {
                zero_elimination: !self.no_zero_elimination,
                hoisting: !self.no_hoisting,
            },
            tensor: TensorOptions {
                drop_zeros: !self.keep_zeros,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a kernel and print (or write) its source.
    Compile {
        file: PathBuf,
        #[arg(short, long, value_enum, default_value = "quadrature")]
        representation: Repr,
        /// Print the kernel IR as JSON.
        #[arg(long)]
        dump_ir: bool,
        /// Print the lowered monomial sum.
        #[arg(long)]
        dump_monomials: bool,
        /// Write the source to `<dir>/<form>_<representation>.c`.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[command(flatten)]
        opt: Optimizations,
    },
    /// Cross-check both representations on random cells.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = 100)]
        cells: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print a CSV row instead of the text report.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        opt: Optimizations,
    },
    /// Time N element-tensor evaluations for both representations.
    Bench {
        file: PathBuf,
        #[arg(short = 'N', default_value_t = DEFAULT_BENCH_N)]
        count: usize,
        #[arg(long, default_value_t = 100)]
        cells: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also time insertion on a unit-square mesh of this size.
        #[arg(long)]
        mesh_n: Option<usize>,
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        opt: Optimizations,
    },
    /// Assemble the global matrix on a uniform unit-square mesh.
    Assemble {
        file: PathBuf,
        #[arg(long, default_value_t = 8)]
        mesh_n: usize,
        #[arg(short, long, value_enum, default_value = "quadrature")]
        representation: Repr,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        opt: Optimizations,
    },
    /// Flop-count sweeps over form families.
    Trends {
        /// Only the corner cases of each sweep.
        #[arg(long)]
        quick: bool,
        /// Print CSV rows instead of tables.
        #[arg(long)]
        csv: bool,
    },
}

/// Error with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: exit_code(&e),
            error: e.into(),
        }
    }
}

fn io(e: anyhow::Error) -> Failure {
    Failure { code: EXIT_IO, error: e }
}

fn load(path: &Path) -> Result<CompiledForm, Failure> {
    let src = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io)?;
    let name = path
        .file_stem()
        .map_or_else(|| "form".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(compile_form(&name, &src)?)
}

fn print_report(r: &ComparisonReport, csv: bool) -> u8 {
    if csv {
        println!("{}", ComparisonReport::CSV_HEADER);
        println!("{}", r.csv_row());
    } else {
        print!("{r}");
    }
    r.exit_code()
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Compile {
            file,
            representation,
            dump_ir,
            dump_monomials,
            emit,
            opt,
        } => {
            let form = load(&file)?;
            if dump_monomials {
                println!("{}", form.sum);
            }
            let g = generate(&form, representation.into(), &opt.build_options())?;
            if dump_ir {
                println!("{}", g.kernel.to_json());
            }
            match emit {
                Some(dir) => {
                    fs::create_dir_all(&dir)
                        .with_context(|| format!("creating {}", dir.display()))
                        .map_err(io)?;
                    let path = dir.join(format!("{}.c", g.kernel.name));
                    fs::write(&path, &g.source)
                        .with_context(|| format!("writing {}", path.display()))
                        .map_err(io)?;
                    eprintln!("wrote {}", path.display());
                }
                None if !dump_ir => print!("{}", g.source),
                None => {}
            }
            eprintln!(
                "{}: {} flops, {} bytes, generated in {:.3e} s",
                g.kernel.name,
                count_flops(&g.kernel).total(),
                g.bytes(),
                g.seconds
            );
            Ok(0)
        }
        Command::Check {
            file,
            cells,
            seed,
            csv,
            opt,
        } => {
            let form = load(&file)?;
            let r = compare(
                &form,
                &CompareOptions {
                    cells,
                    seed,
                    build: opt.build_options(),
                    ..Default::default()
                },
            )?;
            Ok(print_report(&r, csv))
        }
        Command::Bench {
            file,
            count,
            cells,
            seed,
            mesh_n,
            csv,
            opt,
        } => {
            let form = load(&file)?;
            let r = compare(
                &form,
                &CompareOptions {
                    cells,
                    seed,
                    bench_n: Some(count),
                    insertion_mesh: mesh_n,
                    build: opt.build_options(),
                },
            )?;
            Ok(print_report(&r, csv))
        }
        Command::Assemble {
            file,
            mesh_n,
            representation,
            seed,
            opt,
        } => {
            let form = load(&file)?;
            let g = generate(&form, representation.into(), &opt.build_options())?;
            let mesh = unit_square_mesh(mesh_n);
            let spaces = FormSpaces::new(&form, &mesh)?;
            let w = spaces.random_coefficients(seed);
            let a = assemble(&g.kernel, &mesh, &spaces, &w)?;
            let m = &a.matrix;
            println!("form: {} ({})", form.name, representation_name(representation));
            println!("mesh: {} x {} unit square, {} cells", mesh_n, mesh_n, mesh.num_cells());
            println!("matrix: {} x {}, {} nonzeros", m.rows, m.cols, m.nnz());
            println!("sum of entries: {:.15e}", m.total());
            let max_row = m.row_sums().iter().fold(0.0f64, |s, r| s.max(r.abs()));
            println!("max |row sum|: {max_row:.3e}");
            println!(
                "time: element tensors {:.4e} s, insertion {:.4e} s (sequential)",
                a.timings.compute, a.timings.insertion
            );
            Ok(0)
        }
        Command::Trends { quick, csv } => {
            let tables = trend_suite(quick)?;
            if csv {
                println!("family,cell,p,q,nf,flops_q,flops_t,ratio");
            }
            for t in &tables {
                if csv {
                    for e in &t.entries {
                        let na = |v: Option<u64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
                        println!(
                            "{},{},{},{},{},{},{},{}",
                            t.family.name(),
                            t.cell,
                            e.p,
                            e.q,
                            e.nf,
                            na(e.flops_q),
                            e.flops_t.map_or_else(|| e.tensor.marker().to_string(), |v| v.to_string()),
                            e.ratio().map_or_else(|| "NA".to_string(), |r| format!("{r:.2}"))
                        );
                    }
                } else {
                    println!("{}", render_trend_table(t));
                }
            }
            Ok(0)
        }
    }
}

fn representation_name(r: Repr) -> &'static str {
    Representation::from(r).name()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
