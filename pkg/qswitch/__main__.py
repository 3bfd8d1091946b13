from qswitch.cli import main

raise SystemExit(main())
