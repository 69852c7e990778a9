#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfclt/mfclt.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPartial = 3;

int finish(const std::filesystem::path& out, std::size_t rows, const std::vector<mfclt::CellError>& errors)
{
    std::cout << "wrote " << rows << " rows to " << out.string() << '\n';
    if (errors.empty()) return kExitOk;
    std::cerr << errors.size() << " cell(s) failed, see " << (out / "errors.csv").string() << '\n';
    for (const auto& e : errors)
        std::cerr << "  N=" << e.N << " t=" << e.t << " k=" << e.k << " [" << e.stage << "] " << e.message << '\n';
    return kExitPartial;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mean-field fluctuation laboratory: Hartree/Bogoliubov predictions against exact Fock-space dynamics"};
    app.set_version_flag("--version", std::string(mfclt::version()));
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    const auto add_verb = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON experiment config (defaults apply to missing keys)");
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir in the config)");
        return sub;
    };
    CLI::App* clt = add_verb("clt-scan", "Exact distributions vs the Gaussian limit over N and t");
    CLI::App* lln = add_verb("lln-scan", "Exact tail probabilities vs the Chebyshev bound");
    CLI::App* norm = add_verb("norm-approx", "Distance between the exact and the Bogoliubov-approximated state");
    CLI::App* var = add_verb("variance-compare", "Product-state variance scaling and the limiting variance curve");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        mfclt::Config cfg = config_path.empty() ? mfclt::Config{} : mfclt::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        mfclt::validate(cfg);
        const std::filesystem::path out(cfg.output_dir);
        const mfclt::Desk desk = mfclt::make_desk(cfg);

        if (clt->parsed() || lln->parsed()) {
            const mfclt::ScanResult r = mfclt::scan(desk, clt->parsed(), lln->parsed());
            if (clt->parsed()) {
                mfclt::write_clt_outputs(out, cfg, r);
                return finish(out, r.cells.size(), r.errors);
            }
            mfclt::write_lln_outputs(out, cfg, r);
            return finish(out, r.lln.size(), r.errors);
        }
        if (norm->parsed()) {
            const mfclt::NormApproxResult r = mfclt::norm_approx(desk);
            mfclt::write_norm_outputs(out, cfg, r);
            return finish(out, r.rows.size(), r.errors);
        }
        if (var->parsed()) {
            const mfclt::VarianceCompareResult r = mfclt::variance_compare(desk);
            mfclt::write_variance_compare_outputs(out, cfg, r);
            return finish(out, r.factorized.size() + r.curve.size(), r.errors);
        }
    } catch (const mfclt::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
