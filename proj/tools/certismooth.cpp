#include <exception>
#include <iostream>

#include "certismooth/config.hpp"
#include "certismooth/runs.hpp"
#include "certismooth/types.hpp"

namespace {

void print_usage() {
    std::cerr << "usage: certismooth <command> [--config=FILE] [--section.key=value ...]\n"
                 "commands: certify attack adapt ablate-k pretrain-denoiser recompute\n"
                 "exit codes: 0 ok, 2 config error, 3 data error, 4 training divergence\n";
}

}  // namespace

int main(int argc, char** argv) {
    try {
        auto inv = certismooth::config::parse_cli(argc, argv);
        return certismooth::runs::run_command(inv);
    } catch (const certismooth::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        print_usage();
        return 2;
    } catch (const certismooth::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const certismooth::TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
