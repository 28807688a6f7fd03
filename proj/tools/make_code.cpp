// Writes a repeat-accumulate style LDPC parity-check matrix as alist.
//
//   gnnrx-mkcode --n 132 --k 66 --weight 3 --seed 1 --out data/codes/ira_132_66.alist

#include "gnnrx/ldpc.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"generate an IRA-style LDPC code"};
    int n = 0;
    int k = 0;
    int weight = 3;
    std::uint64_t seed = 1;
    std::string out;
    app.add_option("--n", n, "code length")->required();
    app.add_option("--k", k, "code dimension")->required();
    app.add_option("--weight", weight, "systematic column weight");
    app.add_option("--seed", seed, "placement seed");
    app.add_option("--out", out, "output alist path")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        const auto h = gnnrx::generate_ira_code(n, k, weight, seed);
        std::ofstream f(out);
        if (!f) {
            std::cerr << "cannot write " << out << "\n";
            return 1;
        }
        f << gnnrx::to_alist(h);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
